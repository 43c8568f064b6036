"""Deterministic artifact writers shared by the CLI and the acceptance battery.

CSV bodies are locale-independent, full-precision scientific notation so
reruns with identical configs are byte-identical; anything volatile
(timestamps, wall times, library versions) lives only in the manifest.
"""

from __future__ import annotations

import csv
import json
import platform
import time
from pathlib import Path
from typing import Iterable, Sequence

FLOAT_FORMAT = "{:.16e}"  # 17 significant digits: float64 round-trips


def format_value(value) -> str:
    if isinstance(value, bool):
        return str(value).lower()
    if isinstance(value, (int, str)):
        return str(value)
    return FLOAT_FORMAT.format(float(value))


def write_csv(path, columns: Sequence[str], rows: Iterable[Sequence]) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(columns)
        for row in rows:
            writer.writerow([format_value(v) for v in row])


def write_manifest(path, payload: dict) -> None:
    """Write the run manifest; volatile fields are welcome here only."""
    import numpy
    import scipy

    from . import __version__

    doc = dict(payload)
    doc.setdefault("versions", {})
    doc["versions"].update(
        {
            "heatlab": __version__,
            "numpy": numpy.__version__,
            "scipy": scipy.__version__,
            "python": platform.python_version(),
        }
    )
    doc["written_at_unix"] = time.time()
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w") as fh:
        json.dump(doc, fh, sort_keys=True, indent=2, default=_coerce)
        fh.write("\n")


def _coerce(obj):
    try:
        import numpy as np

        if isinstance(obj, (np.floating, np.integer)):
            return obj.item()
        if isinstance(obj, np.ndarray):
            return obj.tolist()
    except ImportError:  # pragma: no cover
        pass
    raise TypeError(f"cannot serialize {type(obj)!r}")
