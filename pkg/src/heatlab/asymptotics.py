"""Long-time convergence measurements: u(t, .) against mass x kernel.

The critical annulus phi(t) sqrt(t) <= d(x, x0) <= sqrt(t)/phi(t) carries
almost all kernel mass for large t; the gap norms split across it mirror
how the convergence rate decomposes into a volume-growth part (outside)
and a regularity part (inside).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .errors import NumericalAbort, PreconditionError
from .evolve import (
    DiscreteOperator,
    TimeSchedule,
    build_operator,
    evolve_to,
    make_state,
    schedule_for,
)
from .kernel import KernelSlice, kernel_series
from .space import SpaceSpec, ball_volumes

BOUNDARY_LEAK_TOL = 1e-6
NOISE_FLOOR = 1e-6


def default_phi(t: float) -> float:
    """Annulus shape t^(-1/4): vanishes while phi sqrt(t) still grows."""
    return t**-0.25


@dataclass
class AnnulusSpec:
    """Grid realization of the critical annulus around one base point."""

    x0_index: int
    t: float
    phi_value: float
    inner: float
    outer: float
    mask: np.ndarray = field(repr=False)


def annulus(
    space: SpaceSpec,
    x0_index: int,
    t: float,
    phi: Callable[[float], float] | float = default_phi,
) -> AnnulusSpec:
    """Grid points with phi sqrt(t) <= d(., x0) <= sqrt(t)/phi."""
    phi_value = float(phi(t)) if callable(phi) else float(phi)
    if not 0.0 < phi_value < 1.0:
        raise PreconditionError(
            f"annulus undefined: need phi(t) in (0, 1), got {phi_value} at t = {t}"
        )
    sqrt_t = math.sqrt(t)
    inner = phi_value * sqrt_t
    outer = sqrt_t / phi_value
    if outer > space.max_distance_from(space.r[x0_index]):
        raise PreconditionError(
            f"outer radius {outer:.3g} beyond the resolved domain"
        )
    d = np.abs(space.r - space.r[x0_index])
    return AnnulusSpec(
        x0_index=x0_index,
        t=float(t),
        phi_value=phi_value,
        inner=inner,
        outer=outer,
        mask=(d >= inner) & (d <= outer),
    )


@dataclass
class ConcentrationResult:
    mass_in: float
    mass_out: float
    annulus: AnnulusSpec


def concentration(
    space: SpaceSpec, kernel_slice: KernelSlice, ann: AnnulusSpec
) -> ConcentrationResult:
    """Split the kernel mass across the annulus."""
    if kernel_slice.mass < 1.0 - 1e-6:
        raise PreconditionError(
            f"kernel slice mass {kernel_slice.mass} below the concentration budget"
        )
    inside = float(kernel_slice.weights[ann.mask] @ kernel_slice.values[ann.mask])
    return ConcentrationResult(
        mass_in=inside, mass_out=kernel_slice.mass - inside, annulus=ann
    )


@dataclass
class ConcentrationSeries:
    """Annulus mass sweep with the fitted tail constant.

    fitted_c is the smallest constant with mass_out <= C phi(t)^nu_prime
    across the sweep.  hypothesis_ok records whether phi was a genuine
    vanishing shape function (a constant phi violates the construction
    and is flagged, not rejected).
    """

    t: np.ndarray
    mass_in: np.ndarray
    mass_out: np.ndarray
    phi_values: np.ndarray
    nu_prime: float
    fitted_c: float
    monotone_in: bool
    hypothesis_ok: bool


def concentration_sweep(
    space: SpaceSpec,
    x0_index: int,
    t_list,
    phi: Callable[[float], float] | float = default_phi,
    *,
    nu_prime: float,
    schedule: TimeSchedule | None = None,
    operator: DiscreteOperator | None = None,
) -> ConcentrationSeries:
    operator = operator or build_operator(space)
    times = sorted(float(t) for t in t_list)
    slices = kernel_series(space, x0_index, times, schedule, operator)
    mass_in, mass_out, phis = [], [], []
    for sl in slices:
        ann = annulus(space, x0_index, sl.t, phi)
        res = concentration(space, sl, ann)
        mass_in.append(res.mass_in)
        mass_out.append(res.mass_out)
        phis.append(ann.phi_value)
    mass_in = np.array(mass_in)
    mass_out = np.array(mass_out)
    phis = np.array(phis)
    return ConcentrationSeries(
        t=np.array(times),
        mass_in=mass_in,
        mass_out=mass_out,
        phi_values=phis,
        nu_prime=float(nu_prime),
        fitted_c=float((mass_out / phis**nu_prime).max()),
        monotone_in=bool(np.all(np.diff(mass_in) >= 0)),
        hypothesis_ok=callable(phi),
    )


@dataclass
class GapNorms:
    """The three convergence gaps at one time."""

    l1: float
    weighted_sup: float
    lp: float
    p: float


def gap_norms(
    space: SpaceSpec,
    u_values: np.ndarray,
    kernel_slice: KernelSlice,
    total_mass: float,
    p: float = 2.0,
) -> GapNorms:
    """L1, volume-weighted sup, and interpolated Lp gaps of u - M h.

    The Lp gap weights the difference by V(., sqrt t)^(1/p') inside the
    p-norm; p = 1 reduces it to the L1 gap exactly.
    """
    if u_values.shape != kernel_slice.values.shape:
        raise PreconditionError("solution and kernel slice live on different grids")
    if not p >= 1:
        raise PreconditionError(f"p must be >= 1, got {p}")
    w = kernel_slice.weights
    gap = np.abs(u_values - total_mass * kernel_slice.values)
    volumes = ball_volumes(space, space.r, math.sqrt(kernel_slice.t))
    l1 = float(w @ gap)
    wsup = float((gap * volumes).max())
    exponent = 0.0 if p == 1 else 1.0 - 1.0 / p  # 1/p'
    lp = float((w @ (gap * volumes**exponent) ** p) ** (1.0 / p))
    return GapNorms(l1=l1, weighted_sup=wsup, lp=lp, p=p)


@dataclass
class ConvergenceSeries:
    """Time-indexed gap norms and annulus masses for one experiment."""

    t: np.ndarray
    l1_gap: np.ndarray
    wsup_gap: np.ndarray
    lp_gap: np.ndarray
    mass_in: np.ndarray
    mass_out: np.ndarray
    inside_gap: np.ndarray
    outside_gap: np.ndarray
    p: float

    def to_csv(self, path) -> None:
        from .reporting import write_csv

        write_csv(
            path,
            ["t", "l1_gap", "wsup_gap", "lp_gap",
             "mass_in", "mass_out", "inside_gap", "outside_gap"],
            zip(self.t, self.l1_gap, self.wsup_gap, self.lp_gap,
                self.mass_in, self.mass_out, self.inside_gap, self.outside_gap),
        )


@dataclass
class RateFit:
    eta_hat: float
    intercept: float
    r2: float
    t_window: tuple[float, float]


def rate_fit(
    t: np.ndarray,
    gaps: np.ndarray,
    window: tuple[float, float] | None = None,
) -> RateFit:
    """Least-squares decay exponent of a gap series: gap ~ t^(-eta_hat).

    Refuses degenerate fits: the window must span two decades and the
    gaps must sit above the solver noise floor.
    """
    t = np.asarray(t, dtype=float)
    gaps = np.asarray(gaps, dtype=float)
    if window is not None:
        keep = (t >= window[0]) & (t <= window[1])
        t, gaps = t[keep], gaps[keep]
    if t.size < 3:
        raise PreconditionError("need at least three points for a rate fit")
    if t.max() / t.min() < 100:
        raise PreconditionError("rate fit window must span at least two decades")
    if (gaps < NOISE_FLOOR).any():
        raise PreconditionError(
            f"gaps reach the noise floor ({NOISE_FLOOR}); refusing the fit"
        )
    slope, intercept = np.polyfit(np.log(t), np.log(gaps), 1)
    fitted = intercept + slope * np.log(t)
    resid = np.log(gaps) - fitted
    total = float(((np.log(gaps) - np.log(gaps).mean()) ** 2).sum())
    r2 = 1.0 - float((resid**2).sum()) / total if total > 0 else 1.0
    return RateFit(
        eta_hat=float(-slope),
        intercept=float(intercept),
        r2=r2,
        t_window=(float(t.min()), float(t.max())),
    )


def triangle_bump(
    operator: DiscreteOperator, center: float, halfwidth: float, mass: float = 1.0
) -> np.ndarray:
    """Piecewise-linear bump (1 - |r - c|/a)_+ with exact discrete mass."""
    profile = np.clip(1.0 - np.abs(operator.space.r - center) / halfwidth, 0.0, None)
    return _normalize(operator, profile, mass)


def smooth_bump(
    operator: DiscreteOperator, center: float, halfwidth: float, mass: float = 1.0
) -> np.ndarray:
    """C^1 compact bump (1 - ((r - c)/a)^2)_+^2 with exact discrete mass."""
    profile = np.clip(1.0 - ((operator.space.r - center) / halfwidth) ** 2, 0.0, None) ** 2
    return _normalize(operator, profile, mass)


def signed_bump_pair(
    operator: DiscreteOperator,
    centers: tuple[float, float],
    halfwidth: float,
    mass: float = 1.0,
) -> np.ndarray:
    """Two opposite triangle bumps; total discrete mass exactly zero."""
    plus = triangle_bump(operator, centers[0], halfwidth, mass)
    minus = triangle_bump(operator, centers[1], halfwidth, mass)
    return plus - minus


def _normalize(operator: DiscreteOperator, profile: np.ndarray, mass: float) -> np.ndarray:
    raw = operator.mass(profile)
    if raw <= 0:
        raise PreconditionError("bump has no mass on this grid")
    return profile * (mass / raw)


def convergence_experiment(
    space: SpaceSpec,
    u0_values: np.ndarray,
    x0_index: int,
    t_list,
    phi: Callable[[float], float] | float = default_phi,
    *,
    p: float = 2.0,
    schedule: TimeSchedule | None = None,
    operator: DiscreteOperator | None = None,
) -> ConvergenceSeries:
    """Evolve u0 and measure every gap against mass x kernel at x0.

    The solution and the kernel are advanced by the same schedule so the
    snapshots align exactly; the run aborts if mass accumulates in the
    outermost cells (extent too small for the requested horizon).
    """
    operator = operator or build_operator(space)
    schedule = schedule or schedule_for(space)
    times = sorted(float(t) for t in t_list)
    t_max = times[-1]
    if 6.0 * math.sqrt(t_max) > space.extent:
        raise NumericalAbort(
            f"extent {space.extent} too small for t_max = {t_max}: boundary "
            f"reflection would exceed the {BOUNDARY_LEAK_TOL:.0e} leak budget"
        )

    state = make_state(operator, u0_values)
    total_mass = state.mass
    u0_scale = float(operator.w @ np.abs(u0_values))
    result = evolve_to(state, operator, t_max, schedule, snapshot_times=times)
    slices = kernel_series(space, x0_index, times, schedule, operator)

    edge = [0, -1] if not space.half_line else [-1]
    rows = {name: [] for name in (
        "l1", "wsup", "lp", "mass_in", "mass_out", "inside", "outside")}
    for snap, sl in zip(result.snapshots, slices):
        boundary_mass = float(np.abs(operator.w[edge] * snap.values[edge]).sum())
        if boundary_mass > BOUNDARY_LEAK_TOL * u0_scale:
            raise NumericalAbort(
                f"boundary mass {boundary_mass:.3e} at t = {snap.time}: extent too small"
            )
        norms = gap_norms(space, snap.values, sl, total_mass, p)
        ann = annulus(space, x0_index, sl.t, phi)
        gap = np.abs(snap.values - total_mass * sl.values)
        inside = float(operator.w[ann.mask] @ gap[ann.mask])
        conc = concentration(space, sl, ann)
        rows["l1"].append(norms.l1)
        rows["wsup"].append(norms.weighted_sup)
        rows["lp"].append(norms.lp)
        rows["mass_in"].append(conc.mass_in)
        rows["mass_out"].append(conc.mass_out)
        rows["inside"].append(inside)
        rows["outside"].append(norms.l1 - inside)
    return ConvergenceSeries(
        t=np.array(times),
        l1_gap=np.array(rows["l1"]),
        wsup_gap=np.array(rows["wsup"]),
        lp_gap=np.array(rows["lp"]),
        mass_in=np.array(rows["mass_in"]),
        mass_out=np.array(rows["mass_out"]),
        inside_gap=np.array(rows["inside"]),
        outside_gap=np.array(rows["outside"]),
        p=p,
    )
