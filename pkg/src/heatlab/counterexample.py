"""Two-ended space: harmonic profile and the sup-norm convergence failure.

On the line with even density A the bounded harmonic functions are
integrals of 1/A: solving (A u')' = 0 gives u' = const / A.  With two
integrable ends (n >= 3) the normalized profile rises from 0 at the left
end to 1 at the right end and flattens along both ends.

Long-time kernel values probed at x_t (the node nearest + sqrt t) settle,
after t^(n/2) scaling, onto a multiple of that profile.  Two neck probes
with different profile values therefore keep a nonvanishing scaled gap,
which is exactly what uniform volume-weighted convergence would forbid;
the same measurement on the one-ended Euclidean model decays, giving the
paired control.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import NumericalAbort, PreconditionError
from .evolve import DiscreteOperator, TimeSchedule, build_operator
from .kernel import kernel_series
from .space import SpaceSpec

FAIL_CONFIRMED = "FAIL-CONFIRMED"
DECAYS = "DECAYS"
INCONCLUSIVE = "INCONCLUSIVE"


@dataclass
class HarmonicProfile:
    """Increasing harmonic function with endpoint values 0 and 1."""

    space: SpaceSpec
    values: np.ndarray = field(repr=False)

    def at(self, position: float) -> float:
        return float(np.interp(position, self.space.r, self.values))

    def to_csv(self, path) -> None:
        from .reporting import write_csv

        write_csv(path, ["r", "profile"], zip(self.space.r, self.values))


def harmonic_profile(space: SpaceSpec) -> HarmonicProfile:
    """Normalized trapezoid cumulative of 1/A on a two-ended space."""
    if space.half_line:
        raise PreconditionError("harmonic profile needs a two-ended space")
    if space.n < 3:
        raise PreconditionError(
            "harmonic profile needs n >= 3 (1/A must be integrable at the ends)"
        )
    inv = 1.0 / space.a_nodes
    cum = np.concatenate(([0.0], np.cumsum((inv[1:] + inv[:-1]) * space.h / 2.0)))
    return HarmonicProfile(space=space, values=cum / cum[-1])


@dataclass
class ProfileLimitScan:
    """t^(n/2) h_t(x_t, probe) series with its late-time plateau.

    plateau averages the last decade of the series; drift is the
    max/min ratio over that window (1 = fully settled).
    """

    probe_index: int
    t: np.ndarray
    scaled_values: np.ndarray
    probe_source_indices: list[int]
    plateau: float
    drift: float
    flags: list[str] = field(default_factory=list)


def _moving_point_series(
    space: SpaceSpec,
    probe_index: int,
    t_list,
    schedule: TimeSchedule | None,
    operator: DiscreteOperator | None,
) -> tuple[np.ndarray, np.ndarray, list[int], list[str]]:
    """t^(n/2) h_t(x_t, probe) via one run sourced at the probe.

    Kernel symmetry turns the moving evaluation point into a moving
    read-off index on a single slice series.
    """
    operator = operator or build_operator(space)
    times = sorted(float(t) for t in t_list)
    slices = kernel_series(space, probe_index, times, schedule, operator)
    flags = []
    values, sources = [], []
    neck = 2.0 * (space.neck_radius or 0.0)
    for sl in slices:
        xt = math.sqrt(sl.t)
        idx = space.index_of(xt)
        if xt < neck + 10.0 * space.h:
            flags.append(f"x_t at t = {sl.t} within 10 cells of the neck")
        values.append(sl.t ** (space.n / 2.0) * sl.values[idx])
        sources.append(idx)
    return np.array(times), np.array(values), sources, flags


def _last_decade(times: np.ndarray) -> np.ndarray:
    return times >= times[-1] / 10.0


def profile_limit_scan(
    space: SpaceSpec,
    probe_index: int,
    t_list,
    schedule: TimeSchedule | None = None,
    operator: DiscreteOperator | None = None,
) -> ProfileLimitScan:
    """Scan the scaled kernel limit at one probe point.

    Only ratios of plateaus between probes are meaningful: the limit
    profile carries an unknown normalization.
    """
    times, values, sources, flags = _moving_point_series(
        space, probe_index, t_list, schedule, operator
    )
    window = _last_decade(times)
    tail = values[window]
    plateau = float(tail.mean())
    drift = float(np.abs(tail).max() / np.abs(tail).min()) if np.abs(tail).min() > 0 else math.inf
    return ProfileLimitScan(
        probe_index=probe_index,
        t=times,
        scaled_values=values,
        probe_source_indices=sources,
        plateau=plateau,
        drift=drift,
        flags=flags,
    )


@dataclass
class SupnormDemo:
    """Scaled two-probe kernel gap g(t) = t^(n/2) (h_t(x_t,x1) - h_t(x_t,x2)).

    verdict is FAIL-CONFIRMED when |g| stabilizes at a nonzero plateau
    over the verdict window (at least 10x the noise floor, max/min drift
    at most 2), DECAYS when the endpoint ratio drops below 0.2, and
    INCONCLUSIVE otherwise.  decay_ratio = |g(t_end)| / |g(t_start)|.
    """

    t: np.ndarray
    g: np.ndarray
    noise_floor: np.ndarray
    plateau: float
    drift: float
    decay_ratio: float
    verdict: str
    flags: list[str] = field(default_factory=list)

    def to_csv(self, path) -> None:
        from .reporting import write_csv

        write_csv(
            path,
            ["t", "g", "plateau_estimate", "noise_floor", "verdict"],
            (
                (t, g, self.plateau, nf, self.verdict)
                for t, g, nf in zip(self.t, self.g, self.noise_floor)
            ),
        )


def supnorm_failure_demo(
    space: SpaceSpec,
    x1_index: int,
    x2_index: int,
    t_list,
    schedule: TimeSchedule | None = None,
    operator: DiscreteOperator | None = None,
    verdict_window: tuple[float, float] | None = None,
) -> SupnormDemo:
    """Measure the scaled kernel gap between two sources probed at x_t.

    The two kernel extractions share the grid and schedule; the noise
    floor is the mass-conservation residual scaled like the measured
    quantity, and the run aborts when the signal sits below it.
    """
    operator = operator or build_operator(space)
    times = sorted(float(t) for t in t_list)
    s1 = kernel_series(space, x1_index, times, schedule, operator)
    s2 = kernel_series(space, x2_index, times, schedule, operator)
    g, floor = [], []
    half = space.n / 2.0
    for a, b in zip(s1, s2):
        xt_index = space.index_of(math.sqrt(a.t))
        g.append(a.t**half * (a.values[xt_index] - b.values[xt_index]))
        residual = max(abs(1.0 - a.mass), abs(1.0 - b.mass))
        peak = max(a.values.max(), b.values.max())
        floor.append(a.t**half * residual * peak)
    g = np.array(g)
    floor = np.array(floor)
    times = np.array(times)

    if verdict_window is None:
        window = _last_decade(times)
    else:
        window = (times >= verdict_window[0]) & (times <= verdict_window[1])
    tail_g = np.abs(g[window])
    tail_floor = floor[window]
    if x1_index != x2_index and (tail_floor > tail_g).any():
        raise NumericalAbort("scaled gap below the solver noise floor")

    plateau = float(g[window].mean())
    drift = float(tail_g.max() / tail_g.min()) if tail_g.min() > 0 else math.inf
    decay_ratio = float(abs(g[-1]) / abs(g[0])) if g[0] != 0 else math.inf
    if np.all(tail_g >= 10.0 * tail_floor) and drift <= 2.0:
        verdict = FAIL_CONFIRMED
    elif decay_ratio <= 0.2:
        verdict = DECAYS
    else:
        verdict = INCONCLUSIVE
    flags = []
    if x1_index == x2_index:
        flags.append("identical probes: gap is identically zero")
    return SupnormDemo(
        t=times,
        g=g,
        noise_floor=floor,
        plateau=plateau,
        drift=drift,
        decay_ratio=decay_ratio,
        verdict=verdict,
        flags=flags,
    )
