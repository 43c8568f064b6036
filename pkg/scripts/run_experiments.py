#!/usr/bin/env python3
"""Run every canned experiment config through the CLI.

Usage: python scripts/run_experiments.py [output_root]
"""

import sys
from pathlib import Path

from heatlab.cli import main

CONFIG_DIR = Path(__file__).parent / "configs"


def run(output_root: str) -> int:
    worst = 0
    for config in sorted(CONFIG_DIR.glob("*.json")):
        print(f"== {config.stem} ==", flush=True)
        code = main(["run", str(config), "--output-root", output_root])
        print(f"   exit {code}")
        worst = max(worst, code)
    return worst


if __name__ == "__main__":
    sys.exit(run(sys.argv[1] if len(sys.argv) > 1 else "results"))
