"""Flux-form weighted Laplacian and mass-conserving implicit stepping.

The operator is the three-point stencil

    (L u)_i = [ A_{i+1/2} (u_{i+1} - u_i) - A_{i-1/2} (u_i - u_{i-1}) ] / w_i

with face densities evaluated at cell midpoints and zero-flux (reflecting)
ends.  Cell weights w_i integrate the density over the dual cell
(Simpson), with half cells at the domain ends so the half-line pole
(where A vanishes) never divides.  Row sums vanish and w_i L_ij = w_j L_ji
by construction, so constants are stationary and discrete mass
sum_i w_i u_i is conserved exactly in exact arithmetic.

Time stepping is Crank-Nicolson in increment form,

    (I - dt/2 L) du = dt L u,    u <- u + du,

solved by a banded direct solve; the system is strictly diagonally
dominant for every dt > 0.  Step sizes grow geometrically with t
(dt = t / steps_per_decade, floored at dt_min) so early-time kernel
sharpness and late-time sweeps are both affordable.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy.linalg import solve_banded

from .errors import MassConservationError, PreconditionError
from .space import SpaceSpec

# Relative per-step budget for the discrete-mass identity; exceeding it
# flags a broken solve, not ordinary round-off.
MASS_DRIFT_TOL = 1e-12


@dataclass
class TimeSchedule:
    """Step-size policy: geometric growth with a floor.

    dt_min also sets the spike-mollification step used when a run starts
    from a discrete delta (`smoothing_steps` steps of dt_min).
    """

    dt_min: float
    steps_per_decade: int = 64
    smoothing_steps: int = 10

    def step_size(self, t: float) -> float:
        return max(self.dt_min, t / self.steps_per_decade)


def schedule_for(space: SpaceSpec, steps_per_decade: int = 64) -> TimeSchedule:
    """Default schedule: dt_min = h^2/4 resolves the discrete delta."""
    return TimeSchedule(dt_min=space.h**2 / 4.0, steps_per_decade=steps_per_decade)


@dataclass
class DiscreteOperator:
    """Tridiagonal weighted Laplacian bound to one space's grid."""

    space: SpaceSpec
    a_face: np.ndarray = field(repr=False)  # A at the N cell midpoints
    w: np.ndarray = field(repr=False)  # N+1 dual-cell measures

    def apply(self, u: np.ndarray) -> np.ndarray:
        flux = self.a_face * (u[1:] - u[:-1]) / self.space.h
        out = np.empty_like(u)
        out[0] = flux[0]
        out[1:-1] = flux[1:] - flux[:-1]
        out[-1] = -flux[-1]
        return out / self.w

    def mass(self, u: np.ndarray) -> float:
        return float(self.w @ u)


@dataclass
class SolutionState:
    """u(t, .) on the grid with its discrete mass."""

    time: float
    values: np.ndarray
    mass: float

    @property
    def l1_norm(self) -> float:
        return float(np.abs(self.values).sum())


def make_state(operator: DiscreteOperator, values: np.ndarray, time: float = 0.0) -> SolutionState:
    values = np.asarray(values, dtype=float)
    if values.shape != operator.w.shape:
        raise PreconditionError("values must live on the operator's grid")
    if not np.isfinite(values).all():
        raise PreconditionError("values must be finite")
    return SolutionState(time=float(time), values=values.copy(), mass=operator.mass(values))


def build_operator(space: SpaceSpec) -> DiscreteOperator:
    """Assemble face densities and Simpson dual-cell weights."""
    if space.npoints + 1 < 3:
        raise PreconditionError("operator needs at least 3 grid nodes")
    r, h = space.r, space.h
    faces = (r[:-1] + r[1:]) / 2.0
    a_face = np.asarray(space.density(faces), dtype=float)
    if not (a_face > 0).all():
        raise PreconditionError("face densities must be positive")

    a_nodes = space.a_nodes
    w = np.empty_like(r)
    # interior dual cell [m_{i-1}, m_i], Simpson with the node as midpoint
    w[1:-1] = (h / 6.0) * (a_face[:-1] + 4.0 * a_nodes[1:-1] + a_face[1:])
    # half cells at the ends, Simpson on [r_0, m_0] and [m_{N-1}, r_N]
    quarter_lo = float(space.density(np.array([r[0] + h / 4.0]))[0])
    quarter_hi = float(space.density(np.array([r[-1] - h / 4.0]))[0])
    w[0] = (h / 12.0) * (a_nodes[0] + 4.0 * quarter_lo + a_face[0])
    w[-1] = (h / 12.0) * (a_face[-1] + 4.0 * quarter_hi + a_nodes[-1])
    if not (w > 0).all():
        raise PreconditionError("cell weights must be positive")
    return DiscreteOperator(space=space, a_face=a_face, w=w)


def _banded_lhs(operator: DiscreteOperator, dt: float) -> np.ndarray:
    conductance = operator.a_face / operator.space.h
    lower = np.zeros_like(operator.w)
    upper = np.zeros_like(operator.w)
    lower[1:] = conductance / operator.w[1:]
    upper[:-1] = conductance / operator.w[:-1]
    ab = np.zeros((3, operator.w.size))
    ab[0, 1:] = -(dt / 2.0) * upper[:-1]
    ab[1] = 1.0 + (dt / 2.0) * (lower + upper)
    ab[2, :-1] = -(dt / 2.0) * lower[1:]
    return ab


def step(state: SolutionState, operator: DiscreteOperator, dt: float) -> SolutionState:
    """One Crank-Nicolson step of size dt > 0."""
    if not dt > 0:
        raise PreconditionError(f"dt must be positive, got {dt}")
    rhs = dt * operator.apply(state.values)
    ab = _banded_lhs(operator, dt)
    # strictly diagonally dominant by construction; solve cannot break down
    increment = solve_banded(
        (1, 1), ab, rhs, overwrite_ab=True, overwrite_b=True, check_finite=False
    )
    values = state.values + increment
    mass = operator.mass(values)
    scale = float(operator.w @ np.abs(values)) or 1.0
    if abs(mass - state.mass) > MASS_DRIFT_TOL * scale:
        raise MassConservationError(
            f"mass drifted by {abs(mass - state.mass):.3e} in one step "
            f"(budget {MASS_DRIFT_TOL:.0e} relative)"
        )
    return SolutionState(time=state.time + dt, values=values, mass=mass)


@dataclass
class EvolveResult:
    """Final state plus requested snapshots and run diagnostics.

    undershoot is the most negative min(u)/max(u) seen at any step;
    mass_drift the largest single-step |mass change| relative to the
    weighted L1 norm.
    """

    state: SolutionState
    snapshots: list[SolutionState]
    undershoot: float
    mass_drift: float


def export_state(path, operator: DiscreteOperator, state: SolutionState) -> None:
    """Snapshot CSV with columns (r, u, w)."""
    from .reporting import write_csv

    write_csv(path, ["r", "u", "w"], zip(operator.space.r, state.values, operator.w))


def evolve_to(
    state: SolutionState,
    operator: DiscreteOperator,
    t_target: float,
    schedule: TimeSchedule,
    snapshot_times: Sequence[float] = (),
) -> EvolveResult:
    """Advance to t_target, landing exactly on each requested snapshot.

    The step sequence is a pure function of (state.time, t_target,
    snapshot_times, schedule), so identical inputs reproduce identical
    trajectories bit for bit.
    """
    if not t_target > state.time:
        raise PreconditionError("t_target must exceed the current time")
    snaps = sorted(set(float(t) for t in snapshot_times))
    if snaps and (snaps[0] <= state.time or snaps[-1] > t_target):
        raise PreconditionError("snapshot times must lie in (state.time, t_target]")
    stops = snaps if snaps and snaps[-1] == t_target else snaps + [t_target]

    current = state
    snapshots: list[SolutionState] = []
    undershoot = 0.0
    drift = 0.0
    for stop in stops:
        while current.time < stop:
            remaining = stop - current.time
            dt = schedule.step_size(current.time)
            final = dt >= remaining * (1.0 - 1e-12)
            previous_mass = current.mass
            current = step(current, operator, remaining if final else dt)
            if final:  # land exactly, guarding fp accumulation
                current = SolutionState(stop, current.values, current.mass)
            peak = float(current.values.max())
            if peak > 0:
                undershoot = min(undershoot, float(current.values.min()) / peak)
            scale = float(operator.w @ np.abs(current.values)) or 1.0
            drift = max(drift, abs(current.mass - previous_mass) / scale)
        if stop in snaps:
            snapshots.append(
                SolutionState(stop, current.values.copy(), current.mass)
            )
    return EvolveResult(
        state=current, snapshots=snapshots, undershoot=undershoot, mass_drift=drift
    )
