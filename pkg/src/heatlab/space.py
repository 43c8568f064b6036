"""Model metric-measure spaces: weighted half-lines and lines.

A rotationally symmetric n-manifold reduces to the half-line [0, L] with
measure A(r) dr, A(r) = omega_{n-1} r^{n-1}; a two-ended space with a
compact neck reduces to the full line [-L, L] with
A(r) = omega_{n-1} (R^2 + r^2)^{(n-1)/2}.  Distance between axis points
is |r - s| and balls are intervals clipped to the domain, so every
volume is a 1-D quadrature of A.

Volumes integrate the piecewise-linear interpolant of A through the grid
nodes (composite trapezoid when the endpoints are nodes), which keeps
all volume queries O(1) after one prefix pass.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Callable, Iterable, Sequence

import numpy as np

from .errors import PreconditionError

EUCLIDEAN_RADIAL = "euclidean_radial"
DUMBBELL_LINE = "dumbbell_line"
CUSTOM_DENSITY = "custom_density"

KINDS = (EUCLIDEAN_RADIAL, DUMBBELL_LINE, CUSTOM_DENSITY)


def sphere_area(n: int) -> float:
    """Surface measure of the unit (n-1)-sphere, 2 pi^(n/2) / Gamma(n/2)."""
    if n < 1:
        raise PreconditionError(f"dimension must be >= 1, got {n}")
    return 2.0 * math.pi ** (n / 2.0) / math.gamma(n / 2.0)


@dataclass
class SpaceSpec:
    """A weighted 1-D space: grid, area density and cached quadrature.

    Instances are immutable by convention once built; all operations in
    this package only read them, so they are safe to share between
    concurrent experiment workers.

    Attributes
    ----------
    kind : str
        One of EUCLIDEAN_RADIAL (half-line, reflecting pole),
        DUMBBELL_LINE (full line, even density) or CUSTOM_DENSITY
        (full line, caller-supplied density).
    n : int
        Dimension tag; drives the closed-form densities and every
        t^(n/2) scaling downstream.
    extent : float
        Domain reach L.  Half-line spaces live on [0, L], full-line
        spaces on [-L, L].
    npoints : int
        Number of grid cells N; the grid has N + 1 nodes.
    neck_radius : float | None
        Neck parameter R of the dumbbell density, None otherwise.
    density : callable
        Vectorized area density A(r); strictly positive except at the
        half-line pole where A(0) = 0 is allowed.
    """

    kind: str
    n: int
    extent: float
    npoints: int
    neck_radius: float | None
    density: Callable[[np.ndarray], np.ndarray]
    r: np.ndarray = field(repr=False)
    h: float
    half_line: bool
    a_nodes: np.ndarray = field(repr=False)
    _cum: np.ndarray = field(repr=False)

    def index_of(self, position: float) -> int:
        """Index of the grid node nearest to `position`."""
        lo, hi = self.r[0], self.r[-1]
        if position < lo - self.h / 2 or position > hi + self.h / 2:
            raise PreconditionError(
                f"position {position} outside domain [{lo}, {hi}]"
            )
        return int(round((position - lo) / self.h))

    def max_distance_from(self, position: float) -> float:
        """Largest axis distance from `position` to a domain endpoint."""
        return max(position - self.r[0], self.r[-1] - position)


def _euclidean_density(n: int) -> Callable[[np.ndarray], np.ndarray]:
    omega = sphere_area(n)

    def density(r):
        return omega * np.abs(np.asarray(r, dtype=float)) ** (n - 1)

    return density


def _dumbbell_density(n: int, neck_radius: float) -> Callable[[np.ndarray], np.ndarray]:
    omega = sphere_area(n)

    def density(r):
        r = np.asarray(r, dtype=float)
        return omega * (neck_radius**2 + r**2) ** ((n - 1) / 2.0)

    return density


def build_space(
    kind: str,
    n: int,
    extent: float,
    npoints: int,
    *,
    neck_radius: float | None = None,
    density: Callable[[np.ndarray], np.ndarray] | None = None,
) -> SpaceSpec:
    """Construct a model space with its grid and cached volume table.

    Parameters
    ----------
    kind : str
        EUCLIDEAN_RADIAL, DUMBBELL_LINE or CUSTOM_DENSITY.
    n : int
        Dimension tag, at least 2.
    extent : float
        Domain reach L > 0.
    npoints : int
        Grid cells N >= 100.  Full-line spaces require N even so that
        r = 0 is a node (the default base point and parity axis).
    neck_radius : float, optional
        Dumbbell neck parameter R > 0; requires extent >= 10 R.
    density : callable, optional
        Custom strictly-positive area density (CUSTOM_DENSITY only).
    """
    if kind not in KINDS:
        raise PreconditionError(f"unknown space kind {kind!r}; expected one of {KINDS}")
    if int(n) != n or n < 2:
        raise PreconditionError(f"dimension must be an integer >= 2, got {n}")
    n = int(n)
    if not extent > 0:
        raise PreconditionError(f"extent must be positive, got {extent}")
    if npoints < 100:
        raise PreconditionError(f"need at least 100 grid cells, got {npoints}")

    if kind == EUCLIDEAN_RADIAL:
        if density is not None or neck_radius is not None:
            raise PreconditionError("euclidean_radial takes no density/neck parameters")
        dens = _euclidean_density(n)
        half_line = True
    elif kind == DUMBBELL_LINE:
        if neck_radius is None or not neck_radius > 0:
            raise PreconditionError("dumbbell_line requires a positive neck_radius")
        if extent < 10 * neck_radius:
            raise PreconditionError(
                f"extent {extent} too small: need extent >= 10 * neck_radius"
            )
        dens = _dumbbell_density(n, neck_radius)
        half_line = False
    else:
        if density is None:
            raise PreconditionError("custom_density requires a density callable")
        dens = density
        half_line = False

    if not half_line and npoints % 2:
        raise PreconditionError("full-line spaces need an even npoints (node at r = 0)")

    lo = 0.0 if half_line else -extent
    r = np.linspace(lo, extent, npoints + 1)
    h = float(r[1] - r[0])
    a_nodes = np.asarray(dens(r), dtype=float)
    if a_nodes.shape != r.shape:
        raise PreconditionError("density must map the grid to an equally shaped array")
    interior_ok = a_nodes > 0
    if half_line:
        interior_ok[0] = a_nodes[0] >= 0  # pole weight may vanish
    if not interior_ok.all():
        raise PreconditionError("area density must be positive on the grid")

    cum = np.concatenate(([0.0], np.cumsum((a_nodes[1:] + a_nodes[:-1]) * h / 2.0)))
    return SpaceSpec(
        kind=kind,
        n=n,
        extent=float(extent),
        npoints=int(npoints),
        neck_radius=None if neck_radius is None else float(neck_radius),
        density=dens,
        r=r,
        h=h,
        half_line=half_line,
        a_nodes=a_nodes,
        _cum=cum,
    )


def _cumulative_measure(space: SpaceSpec, x: np.ndarray) -> np.ndarray:
    """Integral of the interpolated density from the left domain edge to x."""
    r, a, cum, h = space.r, space.a_nodes, space._cum, space.h
    x = np.clip(np.asarray(x, dtype=float), r[0], r[-1])
    idx = np.clip(((x - r[0]) // h).astype(int), 0, space.npoints - 1)
    dx = x - r[idx]
    slope = (a[idx + 1] - a[idx]) / h
    return cum[idx] + dx * a[idx] + 0.5 * slope * dx**2


def ball_volume(space: SpaceSpec, center: float, radius: float) -> float:
    """Measure of the ball {|r - center| <= radius} clipped to the domain."""
    if radius < 0:
        raise PreconditionError(f"radius must be >= 0, got {radius}")
    hi = _cumulative_measure(space, np.array([center + radius]))
    lo = _cumulative_measure(space, np.array([center - radius]))
    return float(hi[0] - lo[0])


def ball_volumes(space: SpaceSpec, centers: np.ndarray, radius: float) -> np.ndarray:
    """Vectorized `ball_volume` over an array of centers (shared radius)."""
    if radius < 0:
        raise PreconditionError(f"radius must be >= 0, got {radius}")
    centers = np.asarray(centers, dtype=float)
    return _cumulative_measure(space, centers + radius) - _cumulative_measure(
        space, centers - radius
    )


@dataclass
class VolumeTable:
    """Ball volumes around one center, ready for CSV export."""

    center: float
    radii: np.ndarray
    volumes: np.ndarray

    def to_csv(self, path) -> None:
        from .reporting import write_csv

        write_csv(path, ["radius", "volume"], zip(self.radii, self.volumes))


def volume_table(space: SpaceSpec, center: float, radii: Sequence[float]) -> VolumeTable:
    radii = np.asarray(sorted(radii), dtype=float)
    if radii.size and radii[0] < 0:
        raise PreconditionError("radii must be non-negative")
    volumes = np.array([ball_volume(space, center, rho) for rho in radii])
    return VolumeTable(center=float(center), radii=radii, volumes=volumes)


@dataclass
class DoublingFit:
    """Empirical volume-growth certificate on a sampled radius range.

    nu and nu_prime bracket log V(R)/V(r) / log(R/r) over all sampled
    pairs with R/r >= 2; doubling_constant is the worst V(2r)/V(r).
    """

    nu: float
    nu_prime: float
    doubling_constant: float
    center: float
    r_min: float
    r_max: float
    ok: bool


def fit_doubling_exponents(
    space: SpaceSpec,
    center: float,
    r_min: float,
    r_max: float,
    *,
    samples: int = 25,
    ceiling: float = 64.0,
) -> DoublingFit:
    """Fit volume-comparison exponents around one center.

    The radius range must span at least two decades; pairs closer than a
    factor 2 are excluded (their log-ratio is noise-dominated).
    """
    if not (0 < r_min < r_max):
        raise PreconditionError("need 0 < r_min < r_max")
    if r_max / r_min < 100:
        raise PreconditionError("radius range must span at least two decades")
    radii = np.geomspace(r_min, r_max, samples)
    vols = np.array([ball_volume(space, center, rho) for rho in radii])
    if (vols <= 0).any():
        raise PreconditionError("sampled volumes must be positive")
    exponents = []
    for i in range(len(radii)):
        for j in range(i + 1, len(radii)):
            if radii[j] / radii[i] < 2.0:
                continue
            exponents.append(
                math.log(vols[j] / vols[i]) / math.log(radii[j] / radii[i])
            )
    doubling = [
        ball_volume(space, center, 2 * rho) / v
        for rho, v in zip(radii, vols)
        if 2 * rho <= r_max
    ]
    constant = float(max(doubling))
    return DoublingFit(
        nu=float(max(exponents)),
        nu_prime=float(min(exponents)),
        doubling_constant=constant,
        center=float(center),
        r_min=float(r_min),
        r_max=float(r_max),
        ok=constant <= ceiling,
    )


@dataclass
class ComparisonSample:
    x: float
    y: float
    radius: float
    ratio: float
    bound: float


@dataclass
class ComparisonReport:
    """Different-center volume comparison against C (1 + d/r)^nu."""

    nu: float
    big_c: float
    samples: list[ComparisonSample]
    passed: bool


def volume_comparison_check(
    space: SpaceSpec,
    triples: Iterable[tuple[float, float, float]],
    nu: float,
    *,
    big_c: float | None = None,
    margin: float = 0.01,
) -> ComparisonReport:
    """Check V(x,r)/V(y,r) <= C (1 + d(x,y)/r)^nu on the given triples.

    With big_c omitted, the smallest admissible constant is calibrated
    from the samples themselves and then inflated by `margin`; the check
    then certifies internal consistency of the fitted pair (C, nu).
    """
    rows = []
    for x, y, radius in triples:
        if not radius > 0:
            raise PreconditionError("comparison radius must be positive")
        vx = ball_volume(space, x, radius)
        vy = ball_volume(space, y, radius)
        ratio = vx / vy
        growth = (1.0 + abs(x - y) / radius) ** nu
        rows.append((x, y, radius, ratio, growth))
    if big_c is None:
        big_c = max(ratio / growth for *_, ratio, growth in rows) * (1.0 + margin)
    samples = [
        ComparisonSample(x, y, radius, ratio, big_c * growth)
        for x, y, radius, ratio, growth in rows
    ]
    passed = all(s.ratio <= s.bound for s in samples)
    return ComparisonReport(nu=float(nu), big_c=float(big_c), samples=samples, passed=passed)


def space_to_json(space: SpaceSpec) -> str:
    """Serialize the space parameters (closed-form densities only)."""
    if space.kind == CUSTOM_DENSITY:
        raise PreconditionError("custom densities are not serializable")
    doc = {
        "kind": space.kind,
        "n": space.n,
        "R": space.neck_radius,
        "extent": space.extent,
        "points": space.npoints,
    }
    return json.dumps(doc, sort_keys=True)


def space_from_json(text: str) -> SpaceSpec:
    doc = json.loads(text)
    missing = {"kind", "n", "extent", "points"} - set(doc)
    if missing:
        raise PreconditionError(f"space document missing keys: {sorted(missing)}")
    return build_space(
        doc["kind"],
        doc["n"],
        doc["extent"],
        doc["points"],
        neck_radius=doc.get("R"),
    )
