"""Acceptance battery: one function per exit criterion, with artifacts.

Each criterion pins its tolerances here; results carry the measured
values so the manifest documents how much margin a run had.  Criteria 6
and 7 are measured against a planar closed-form convolution oracle
(tensor-grid quadrature of the flat-space kernel against compactly
supported data), which keeps the rate and weighted-sup measurements
independent of the 1-D solver they accompany.
"""

from __future__ import annotations

import filecmp
import functools
import math
import tempfile
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .asymptotics import concentration_sweep, rate_fit
from .counterexample import (
    FAIL_CONFIRMED,
    profile_limit_scan,
    harmonic_profile,
    supnorm_failure_demo,
)
from .errors import PreconditionError
from .estimates import (
    check_time_derivative,
    check_two_sided,
    estimate_holder,
    envelope_integrals,
    envelope_tail_scan,
)
from .evolve import TimeSchedule, build_operator
from .kernel import euclidean_kernel, numeric_kernel, semigroup_check
from .reporting import write_csv
from .space import build_space, fit_doubling_exponents

T_SWEEP = tuple(float(t) for t in np.geomspace(100.0, 10000.0, 9))
COUNTEREXAMPLE_T = tuple(float(t) for t in np.geomspace(50.0, 400.0, 10))


@dataclass
class CriterionResult:
    cid: int
    name: str
    passed: bool
    measured: dict
    seconds: float = 0.0
    artifacts: list[str] = field(default_factory=list)

    def summary_line(self) -> str:
        verdict = "PASS" if self.passed else "FAIL"
        return f"[{verdict}] criterion {self.cid:2d} ({self.name}) in {self.seconds:.1f}s"


@functools.lru_cache(maxsize=None)
def _euclidean_space(npoints: int, extent: float = 40.0, n: int = 2):
    return build_space("euclidean_radial", n, extent, npoints)


@functools.lru_cache(maxsize=None)
def _kernel_accuracy(npoints: int, steps_per_decade: int) -> dict:
    """Relative sup deviation from the closed form on r <= 4 (n=2, t=1)."""
    space = _euclidean_space(npoints)
    schedule = TimeSchedule(dt_min=space.h**2 / 4.0, steps_per_decade=steps_per_decade)
    sl = numeric_kernel(space, 0, 1.0, schedule)
    reference = euclidean_kernel(2, 1.0, space.r)
    window = space.r <= 4.0
    rel = np.abs(sl.values[window] - reference[window]) / reference[window]
    return {
        "rel_linf": float(rel.max()),
        "mass": sl.mass,
        "min_over_peak": sl.min_value / float(sl.values.max()),
        "values": sl.values,
        "radii": space.r,
    }


def criterion_1(outdir: Path | None = None) -> CriterionResult:
    """Numeric kernel matches the closed form to 1e-3 on r <= 4."""
    start = time.time()
    data = _kernel_accuracy(4000, 64)
    artifacts = []
    if outdir is not None:
        path = Path(outdir) / "c01_kernel_accuracy.csv"
        reference = euclidean_kernel(2, 1.0, data["radii"])
        write_csv(
            path,
            ["r", "h_numeric", "h_closed_form"],
            zip(data["radii"], data["values"], reference),
        )
        artifacts.append(str(path))
    return CriterionResult(
        cid=1,
        name="kernel_accuracy",
        passed=data["rel_linf"] <= 1e-3,
        measured={"rel_linf": data["rel_linf"], "tolerance": 1e-3},
        seconds=time.time() - start,
        artifacts=artifacts,
    )


def criterion_2(outdir: Path | None = None) -> CriterionResult:
    """Mass window, weighted symmetry, and semigroup residuals."""
    start = time.time()
    euclid = _euclidean_space(4000)
    dumbbell = build_space("dumbbell_line", 3, 30.0, 3000, neck_radius=1.0)
    op = build_operator(dumbbell)

    masses = [numeric_kernel(euclid, 0, 1.0).mass]
    rng = np.random.default_rng(0)
    resolved = np.flatnonzero(np.abs(dumbbell.r) <= 10.0)
    sources = np.sort(rng.choice(resolved, size=5, replace=False))
    slices = {int(s): numeric_kernel(dumbbell, int(s), 4.0, operator=op) for s in sources}
    masses.extend(sl.mass for sl in slices.values())
    sym_residual = 0.0
    for a in range(len(sources)):
        for b in range(a + 1, len(sources)):
            i, j = int(sources[a]), int(sources[b])
            peak = max(slices[i].values.max(), slices[j].values.max())
            sym_residual = max(
                sym_residual, abs(slices[i].values[j] - slices[j].values[i]) / peak
            )

    semi_euclid = semigroup_check(euclid, 1.0, 1.0, 0)
    semi_dumbbell = semigroup_check(dumbbell, 4.0, 4.0, dumbbell.index_of(0.0), operator=op)

    mass_ok = all(1.0 - 1e-6 <= m <= 1.0 + 1e-12 for m in masses)
    measured = {
        "mass_min": min(masses),
        "mass_max": max(masses),
        "symmetry_residual": sym_residual,
        "semigroup_euclidean": semi_euclid,
        "semigroup_dumbbell": semi_dumbbell,
    }
    passed = (
        mass_ok
        and sym_residual <= 1e-8
        and semi_euclid <= 1e-3
        and semi_dumbbell <= 3e-3
    )
    artifacts = []
    if outdir is not None:
        path = Path(outdir) / "c02_structural.csv"
        write_csv(
            path,
            ["check", "value"],
            [(k, v) for k, v in sorted(measured.items())],
        )
        artifacts.append(str(path))
    return CriterionResult(2, "structural_identities", passed, measured,
                           time.time() - start, artifacts)


def criterion_3(outdir: Path | None = None) -> CriterionResult:
    """Estimate battery anchors on the flat model (n = 2)."""
    start = time.time()
    space = _euclidean_space(4000)
    op = build_operator(space)
    two_sided = check_two_sided(space, 0, [1.0, 2.0, 4.0], operator=op)
    deriv = check_time_derivative(space, 0, 1.0, operator=op)
    holder = estimate_holder(space, 0, 1.0, operator=op)
    measured = {
        "amplitude": two_sided.constants["amplitude"],
        "slope": two_sided.constants["slope"],
        "r2": two_sided.residual_stats["r2"],
        "time_derivative_ratio_at_zero": deriv.constants["ratio_at_zero"],
        "theta_hat": holder.constants["theta_hat"],
    }
    passed = (
        abs(measured["amplitude"] - 0.25) <= 0.01
        and abs(measured["slope"] + 0.25) <= 0.01
        and measured["r2"] >= 0.99
        and abs(measured["time_derivative_ratio_at_zero"] - 0.25) <= 0.01
        and 0.9 <= measured["theta_hat"] <= 1.05
    )
    artifacts = []
    if outdir is not None:
        path = Path(outdir) / "c03_estimates.csv"
        write_csv(
            path,
            ["d2_over_t", "log_v_h"],
            zip(two_sided.samples["d2_over_t"], two_sided.samples["log_v_h"]),
        )
        artifacts.append(str(path))
    return CriterionResult(3, "estimate_battery", passed, measured,
                           time.time() - start, artifacts)


def criterion_4(outdir: Path | None = None) -> CriterionResult:
    """Gaussian-envelope integral value and tail decay slope."""
    start = time.time()
    space = _euclidean_space(4000)
    result = envelope_integrals(space, 0.0, 0.25, 1.0, 1.0)
    scan = envelope_tail_scan(space, 0.0, 0.25, 1.0, np.geomspace(2.0, 10.0, 8))
    measured = {
        "full_integral": result.full_integral,
        "tail_slope": scan.slope,
        "boundary_ok": result.boundary_ok,
    }
    passed = (
        abs(result.full_integral - 4.0) <= 0.02
        and scan.slope <= -4.0
        and result.boundary_ok
    )
    artifacts = []
    if outdir is not None:
        path = Path(outdir) / "c04_envelope_integrals.csv"
        write_csv(
            path,
            ["r_over_sqrt_t", "tail_integral"],
            zip(scan.r_over_sqrt_t, scan.tail_integrals),
        )
        artifacts.append(str(path))
    return CriterionResult(4, "envelope_integrals", passed, measured,
                           time.time() - start, artifacts)


def criterion_5(outdir: Path | None = None) -> CriterionResult:
    """Annulus concentration sweep: value anchor, limit, monotonicity."""
    start = time.time()
    space = build_space("euclidean_radial", 2, 1100.0, 4400)
    fit = fit_doubling_exponents(space, 0.0, 10 * space.h, space.extent / 4)
    sweep = concentration_sweep(
        space, 0, [100.0, 1000.0, 10000.0], nu_prime=fit.nu_prime
    )
    measured = {
        "mass_in_100": float(sweep.mass_in[0]),
        "mass_in_10000": float(sweep.mass_in[-1]),
        "monotone": sweep.monotone_in,
        "nu_prime": fit.nu_prime,
    }
    passed = (
        abs(measured["mass_in_100"] - 0.893) <= 0.01
        and measured["mass_in_10000"] >= 0.99
        and sweep.monotone_in
    )
    artifacts = []
    if outdir is not None:
        path = Path(outdir) / "c05_concentration.csv"
        write_csv(
            path,
            ["t", "mass_in", "mass_out", "phi"],
            zip(sweep.t, sweep.mass_in, sweep.mass_out, sweep.phi_values),
        )
        artifacts.append(str(path))
    return CriterionResult(5, "annulus_concentration", passed, measured,
                           time.time() - start, artifacts)


def planar_convergence_series(
    t_values=T_SWEEP,
    *,
    grid_points: int = 400,
    support_points: int = 200,
    box_halfwidth_scaled: float = 8.0,
    bump_halfwidth: float = 2.0,
    center_distance: float = 3.0,
    p: float = 2.0,
) -> dict[str, np.ndarray]:
    """Closed-form planar convolution oracle for the long-time convergence law.

    A unit-mass triangle bump at distance `center_distance` from the base
    point is pushed forward by exact Gaussian quadrature on a tensor grid
    scaled with sqrt(t) (so sampling quality is t-independent), and the
    three gap norms are measured against mass x kernel at the base point.
    Everything here is independent of the 1-D solver.
    """
    c1, c2 = center_distance, 0.0
    y1 = np.linspace(c1 - bump_halfwidth, c1 + bump_halfwidth, support_points)
    y2 = np.linspace(c2 - bump_halfwidth, c2 + bump_halfwidth, support_points)
    rho = np.sqrt((y1[:, None] - c1) ** 2 + (y2[None, :] - c2) ** 2)
    u0 = np.clip(1.0 - rho / bump_halfwidth, 0.0, None)
    wy1 = np.full_like(y1, y1[1] - y1[0])
    wy1[[0, -1]] /= 2.0
    wy2 = np.full_like(y2, y2[1] - y2[0])
    wy2[[0, -1]] /= 2.0
    weights_y = np.outer(wy1, wy2)
    u0 /= float((u0 * weights_y).sum())  # discrete unit mass, exactly
    seeded = u0 * weights_y

    if not p > 1:
        raise PreconditionError("the planar oracle interpolates between p = 1 and infinity")
    conj = 1.0 - 1.0 / p  # 1/p'
    out = {key: [] for key in ("t", "l1", "wsup", "lp")}
    for t in t_values:
        scale = math.sqrt(t)
        x = np.linspace(-box_halfwidth_scaled * scale, box_halfwidth_scaled * scale,
                        grid_points)
        wx = np.full_like(x, x[1] - x[0])
        wx[[0, -1]] /= 2.0
        g1 = np.exp(-((x[:, None] - y1[None, :]) ** 2) / (4.0 * t))
        g2 = np.exp(-((x[:, None] - y2[None, :]) ** 2) / (4.0 * t))
        u = (g1 @ seeded @ g2.T) / (4.0 * math.pi * t)
        hk = np.exp(-(x[:, None] ** 2 + x[None, :] ** 2) / (4.0 * t)) / (4.0 * math.pi * t)
        gap = np.abs(u - hk)
        cell = np.outer(wx, wx)
        volume = math.pi * t  # planar ball measure, identical at every point
        out["t"].append(t)
        out["l1"].append(float((gap * cell).sum()))
        out["wsup"].append(float(gap.max() * volume))
        out["lp"].append(float(((gap * volume**conj) ** p * cell).sum() ** (1.0 / p)))
    return {key: np.array(vals) for key, vals in out.items()}


@functools.lru_cache(maxsize=1)
def _planar_series_cached() -> dict[str, np.ndarray]:
    return planar_convergence_series()


def criterion_6(outdir: Path | None = None) -> CriterionResult:
    """L1-gap decay exponent of the planar experiment sits near 1/2."""
    start = time.time()
    series = _planar_series_cached()
    fit = rate_fit(series["t"], series["l1"])
    measured = {"eta_hat": fit.eta_hat, "r2": fit.r2}
    passed = 0.4 <= fit.eta_hat <= 0.6
    artifacts = []
    if outdir is not None:
        path = Path(outdir) / "c06_planar_convergence.csv"
        write_csv(
            path,
            ["t", "l1_gap", "wsup_gap", "lp_gap"],
            zip(series["t"], series["l1"], series["wsup"], series["lp"]),
        )
        artifacts.append(str(path))
    return CriterionResult(6, "l1_rate", passed, measured, time.time() - start, artifacts)


def criterion_7(outdir: Path | None = None) -> CriterionResult:
    """Weighted sup gap shrinks 10x over two decades; L2 interpolation holds."""
    start = time.time()
    series = _planar_series_cached()
    ratio = float(series["wsup"][-1] / series["wsup"][0])
    slack = float(
        np.max(series["lp"] / np.sqrt(series["l1"] * series["wsup"]) - 1.0)
    )
    measured = {"wsup_ratio": ratio, "interpolation_slack": slack}
    passed = ratio <= 0.1 and slack <= 1e-6
    return CriterionResult(7, "weighted_sup_gap", passed, measured, time.time() - start)


def criterion_8(outdir: Path | None = None) -> CriterionResult:
    """Two-ended failure demo with its one-ended control and profile ratio."""
    start = time.time()
    dumbbell = build_space("dumbbell_line", 3, 200.0, 20000, neck_radius=1.0)
    op = build_operator(dumbbell)
    window = (100.0, 400.0)
    demo = supnorm_failure_demo(
        dumbbell,
        dumbbell.index_of(1.0),
        dumbbell.index_of(-1.0),
        COUNTEREXAMPLE_T,
        operator=op,
        verdict_window=window,
    )
    in_window = (demo.t >= window[0]) & (demo.t <= window[1])
    floor_margin = float(
        np.min(np.abs(demo.g[in_window]) / np.maximum(demo.noise_floor[in_window], 1e-300))
    )

    scan2 = profile_limit_scan(dumbbell, dumbbell.index_of(2.0), COUNTEREXAMPLE_T, operator=op)
    scan4 = profile_limit_scan(dumbbell, dumbbell.index_of(4.0), COUNTEREXAMPLE_T, operator=op)
    profile = harmonic_profile(dumbbell)
    plateau_ratio = scan2.plateau / scan4.plateau
    oracle_ratio = profile.at(2.0) / profile.at(4.0)

    control_space = build_space("euclidean_radial", 3, 200.0, 10000)
    control = supnorm_failure_demo(
        control_space,
        control_space.index_of(1.0),
        control_space.index_of(2.0),
        COUNTEREXAMPLE_T,
        verdict_window=window,
    )

    measured = {
        "verdict": demo.verdict,
        "plateau": demo.plateau,
        "drift": demo.drift,
        "noise_floor_margin": floor_margin,
        "control_decay_ratio": control.decay_ratio,
        "plateau_ratio": plateau_ratio,
        "profile_ratio": oracle_ratio,
        "plateau_ratio_rel_dev": abs(plateau_ratio / oracle_ratio - 1.0),
    }
    passed = (
        demo.verdict == FAIL_CONFIRMED
        and floor_margin >= 10.0
        and demo.drift <= 2.0
        and control.decay_ratio <= 0.2
        and abs(plateau_ratio / oracle_ratio - 1.0) <= 0.15
    )
    artifacts = []
    if outdir is not None:
        gap_path = Path(outdir) / "c08_two_ended_gap.csv"
        write_csv(
            gap_path,
            ["t", "g", "noise_floor", "control_g"],
            zip(demo.t, demo.g, demo.noise_floor, control.g),
        )
        profile_path = Path(outdir) / "c08_harmonic_profile.csv"
        write_csv(profile_path, ["r", "profile"], zip(dumbbell.r, profile.values))
        artifacts = [str(gap_path), str(profile_path)]
    return CriterionResult(8, "two_ended_counterexample", passed, measured,
                           time.time() - start, artifacts)


def criterion_9(outdir: Path | None = None) -> CriterionResult:
    """Halving h and dt cuts the kernel error by a second-order factor."""
    start = time.time()
    coarse = _kernel_accuracy(4000, 64)["rel_linf"]
    fine = _kernel_accuracy(8000, 128)["rel_linf"]
    factor = coarse / fine
    return CriterionResult(
        9,
        "solver_order",
        3.0 <= factor <= 5.0,
        {"error_coarse": coarse, "error_fine": fine, "factor": factor},
        time.time() - start,
    )


# every criterion that writes CSV artifacts
_DETERMINISM_SUBSET = (1, 2, 3, 4, 5, 6, 8)


def criterion_10(outdir: Path | None = None) -> CriterionResult:
    """Re-running the artifact battery yields byte-identical CSV bodies."""
    start = time.time()
    cached = [_kernel_accuracy, _planar_series_cached, _euclidean_space]
    identical = True
    compared = []
    with tempfile.TemporaryDirectory() as tmp:
        dirs = [Path(tmp) / "first", Path(tmp) / "second"]
        for directory in dirs:
            for fn in cached:
                fn.cache_clear()  # force full recomputation
            for cid in _DETERMINISM_SUBSET:
                CRITERIA[cid](directory)
        for name in sorted(p.name for p in dirs[0].glob("*.csv")):
            same = filecmp.cmp(dirs[0] / name, dirs[1] / name, shallow=False)
            compared.append(name)
            identical = identical and same
    return CriterionResult(
        10,
        "determinism",
        identical and bool(compared),
        {"files_compared": len(compared), "identical": identical},
        time.time() - start,
    )


CRITERIA = {
    1: criterion_1,
    2: criterion_2,
    3: criterion_3,
    4: criterion_4,
    5: criterion_5,
    6: criterion_6,
    7: criterion_7,
    8: criterion_8,
    9: criterion_9,
    10: criterion_10,
}


def run_all(outdir: Path | None = None, ids=None) -> list[CriterionResult]:
    """Run the requested criteria (all by default) in order."""
    selected = sorted(ids) if ids else sorted(CRITERIA)
    results = []
    for cid in selected:
        result = CRITERIA[cid](outdir)
        print(result.summary_line(), flush=True)
        results.append(result)
    return results
