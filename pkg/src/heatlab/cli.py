"""Experiment runner: config in, deterministic CSV/JSON artifacts out.

Usage:
    heatlab run <config.json> [--output-root DIR]
    heatlab acceptance [--output-root DIR] [--criteria 1,4,5]
    heatlab list-experiments

The output root defaults to $HEATLAB_OUTPUT_ROOT, then ./results.  Exit
codes: 0 all asserted checks passed, 2 config error, 3 precondition
violation, 4 numerical abort, 5 check failure (report-only quantities
never fail a run).
"""

from __future__ import annotations

import argparse
import json
import os
import sys
import time
from pathlib import Path

import numpy as np

from .acceptance import CRITERIA, run_all
from .asymptotics import (
    concentration_sweep,
    convergence_experiment,
    rate_fit,
    signed_bump_pair,
    smooth_bump,
    triangle_bump,
)
from .counterexample import profile_limit_scan, harmonic_profile, supnorm_failure_demo
from .errors import ConfigError, NumericalAbort, PreconditionError
from .estimates import (
    check_gradient,
    check_time_derivative,
    check_two_sided,
    estimate_holder,
    envelope_integrals,
    envelope_tail_scan,
)
from .evolve import TimeSchedule, build_operator, export_state, make_state
from .kernel import euclidean_kernel, numeric_kernel, semigroup_check
from .reporting import write_csv, write_manifest
from .space import EUCLIDEAN_RADIAL, build_space, fit_doubling_exponents

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_PRECONDITION = 3
EXIT_NUMERICAL = 4
EXIT_CHECK_FAILED = 5

DEFAULT_OUTPUT_ROOT = "results"
OUTPUT_ROOT_ENV = "HEATLAB_OUTPUT_ROOT"


def _require(config: dict, key: str):
    if key not in config:
        raise ConfigError(f"config missing required key {key!r}")
    return config[key]


def _build_space(config: dict):
    doc = _require(config, "space")
    if not isinstance(doc, dict):
        raise ConfigError("'space' must be an object")
    for key in ("kind", "n", "extent", "points"):
        if key not in doc:
            raise ConfigError(f"space config missing {key!r}")
    try:
        return build_space(
            doc["kind"], doc["n"], doc["extent"], doc["points"], neck_radius=doc.get("R")
        )
    except PreconditionError as exc:
        raise ConfigError(f"invalid space config: {exc}") from exc


def _schedule(config: dict, space) -> TimeSchedule:
    doc = config.get("schedule", {})
    return TimeSchedule(
        dt_min=doc.get("dt_min", space.h**2 / 4.0),
        steps_per_decade=doc.get("steps_per_decade", 64),
        smoothing_steps=doc.get("smoothing_steps", 10),
    )


def _phi(config: dict):
    exponent = config.get("phi_exponent", -0.25)

    def phi(t):
        return t**exponent

    return phi


def _initial_data(config: dict, operator):
    doc = _require(config, "u0")
    profile = doc.get("profile", "triangle")
    halfwidth = doc.get("halfwidth", 1.0)
    mass = doc.get("mass", 1.0)
    if profile == "triangle":
        return triangle_bump(operator, doc.get("center", 0.0), halfwidth, mass)
    if profile == "smooth":
        return smooth_bump(operator, doc.get("center", 0.0), halfwidth, mass)
    if profile == "signed_pair":
        centers = doc.get("centers")
        if not centers or len(centers) != 2:
            raise ConfigError("signed_pair needs 'centers': [c_plus, c_minus]")
        return signed_bump_pair(operator, tuple(centers), halfwidth, mass)
    raise ConfigError(f"unknown initial-data profile {profile!r}")


def run_kernel_accuracy(config: dict, outdir: Path) -> dict:
    space = _build_space(config)
    schedule = _schedule(config, space)
    t = float(config.get("t", 1.0))
    source = space.index_of(float(config.get("source", space.r[0])))
    sl = numeric_kernel(space, source, t, schedule)
    checks = {"mass_window": bool(1 - 1e-6 <= sl.mass <= 1 + 1e-12)}
    measured = {"mass": sl.mass, "min_value": sl.min_value}
    columns = ["r", "h_numeric", "w"]
    rows = list(zip(space.r, sl.values, sl.weights))
    if space.kind == EUCLIDEAN_RADIAL:
        reference = euclidean_kernel(space.n, t, np.abs(space.r - space.r[source]))
        window = np.abs(space.r - space.r[source]) <= config.get("window_radius", 4.0)
        rel = float(np.max(np.abs(sl.values[window] - reference[window]) / reference[window]))
        measured["rel_linf"] = rel
        checks["closed_form_agreement"] = rel <= config.get("tolerance", 1e-3)
        columns.append("h_closed_form")
        rows = list(zip(space.r, sl.values, sl.weights, reference))
    write_csv(outdir / "kernel_slice.csv", columns, rows)
    if config.get("semigroup_s") is not None:
        s = float(config["semigroup_s"])
        residual = semigroup_check(space, t, s, source, schedule)
        measured["semigroup_residual"] = residual
        checks["semigroup"] = residual <= config.get("semigroup_tolerance", 3e-3)
    return {
        "checks": checks,
        "measured": measured,
        "verifies": ["closed_form_kernel_agreement", "stochastic_completeness"],
    }


def run_estimates(config: dict, outdir: Path) -> dict:
    space = _build_space(config)
    schedule = _schedule(config, space)
    operator = build_operator(space)
    seed = int(config.get("seed", 0))
    source = space.index_of(float(config.get("source", space.r[0])))
    t = float(config.get("t", 1.0))
    t_list = [float(v) for v in config.get("t_list", [t, 2 * t, 4 * t])]

    reports = {
        "two_sided": check_two_sided(space, source, t_list, seed=seed,
                                     schedule=schedule, operator=operator),
        "time_derivative": check_time_derivative(space, source, t, seed=seed,
                                                 schedule=schedule, operator=operator),
        "gradient": check_gradient(space, source, t, seed=seed,
                                   schedule=schedule, operator=operator),
        "holder": estimate_holder(space, source, t, schedule=schedule, operator=operator),
    }
    checks, measured, summary_rows = {}, {}, []
    for name, report in reports.items():
        if report.passed is not None:
            checks[name] = bool(report.passed)
        measured[name] = report.constants
        with open(outdir / f"{name}.json", "w") as fh:
            fh.write(report.to_json())
        if report.samples:
            keys = sorted(report.samples)
            write_csv(outdir / f"{name}_samples.csv", keys,
                      zip(*(report.samples[k] for k in keys)))
        for constant, value in sorted(report.constants.items()):
            summary_rows.append((name, constant, value))
    write_csv(outdir / "summary.csv", ["estimate", "constant", "value"], summary_rows)
    return {
        "checks": checks,
        "measured": measured,
        "verifies": [
            "gaussian_two_sided_bound", "time_derivative_bound",
            "gradient_bound", "holder_modulus",
        ],
    }


def run_envelope(config: dict, outdir: Path) -> dict:
    space = _build_space(config)
    center = float(config.get("center", space.r[0]))
    c_const = float(config.get("c_const", 0.25))
    t = float(config.get("t", 1.0))
    r_list = config.get("r_list") or list(np.geomspace(2.0, 10.0, 8) * np.sqrt(t))
    result = envelope_integrals(space, center, c_const, t, max(np.sqrt(t), min(r_list)))
    scan = envelope_tail_scan(space, center, c_const, t, r_list)
    write_csv(outdir / "tail_integrals.csv",
              ["r_over_sqrt_t", "tail_integral"],
              zip(scan.r_over_sqrt_t, scan.tail_integrals))
    return {
        "checks": {"boundary_resolved": result.boundary_ok},
        "measured": {
            "full_integral": result.full_integral,
            "tail_slope": scan.slope,
            "tail_ratios": {str(k): v for k, v in result.tail_ratios.items()},
        },
        "verifies": ["envelope_integral", "envelope_tail_decay"],
    }


def run_concentration(config: dict, outdir: Path) -> dict:
    space = _build_space(config)
    schedule = _schedule(config, space)
    x0 = space.index_of(float(config.get("x0", space.r[0])))
    t_list = [float(v) for v in _require(config, "t_list")]
    nu_prime = config.get("nu_prime")
    if nu_prime is None:
        nu_prime = fit_doubling_exponents(
            space, space.r[x0], 10 * space.h, space.extent / 4
        ).nu_prime
    sweep = concentration_sweep(space, x0, t_list, _phi(config),
                                nu_prime=nu_prime, schedule=schedule)
    write_csv(outdir / "concentration.csv",
              ["t", "mass_in", "mass_out", "phi"],
              zip(sweep.t, sweep.mass_in, sweep.mass_out, sweep.phi_values))
    return {
        "checks": {"mass_in_monotone": sweep.monotone_in,
                   "shape_function_valid": sweep.hypothesis_ok},
        "measured": {"mass_in_final": float(sweep.mass_in[-1]),
                     "fitted_c": sweep.fitted_c, "nu_prime": float(nu_prime)},
        "verifies": ["annulus_concentration"],
    }


def run_convergence(config: dict, outdir: Path) -> dict:
    space = _build_space(config)
    schedule = _schedule(config, space)
    operator = build_operator(space)
    x0 = space.index_of(float(config.get("x0", space.r[0])))
    t_list = [float(v) for v in _require(config, "t_list")]
    u0 = _initial_data(config, operator)
    series = convergence_experiment(
        space, u0, x0, t_list, _phi(config),
        p=float(config.get("p", 2.0)), schedule=schedule, operator=operator,
    )
    series.to_csv(outdir / "convergence.csv")
    export_state(outdir / "initial_state.csv", operator, make_state(operator, u0))
    checks, measured = {}, {
        "l1_gap_final": float(series.l1_gap[-1]),
        "wsup_gap_final": float(series.wsup_gap[-1]),
    }
    if config.get("fit_window"):
        lo, hi = config["fit_window"]
        fit = rate_fit(series.t, series.l1_gap, (float(lo), float(hi)))
        measured["eta_hat"] = fit.eta_hat
        if config.get("eta_window"):
            eta_lo, eta_hi = config["eta_window"]
            checks["l1_rate"] = eta_lo <= fit.eta_hat <= eta_hi
    if config.get("assert_decreasing_wsup", False):
        checks["wsup_decreasing"] = bool(np.all(np.diff(series.wsup_gap) <= 0))
    return {
        "checks": checks,
        "measured": measured,
        "verifies": ["l1_convergence", "weighted_sup_convergence", "lp_interpolation"],
    }


def run_counterexample(config: dict, outdir: Path) -> dict:
    space = _build_space(config)
    schedule = _schedule(config, space)
    operator = build_operator(space)
    t_list = [float(v) for v in _require(config, "t_list")]
    window = config.get("verdict_window")
    window = (float(window[0]), float(window[1])) if window else None
    x1 = space.index_of(float(config.get("x1", 1.0)))
    x2 = space.index_of(float(config.get("x2", -1.0)))
    demo = supnorm_failure_demo(space, x1, x2, t_list, schedule, operator,
                                verdict_window=window)
    demo.to_csv(outdir / "scaled_gap.csv")
    profile = harmonic_profile(space)
    profile.to_csv(outdir / "harmonic_profile.csv")
    measured = {"verdict": demo.verdict, "plateau": demo.plateau, "drift": demo.drift}
    checks = {"nonvanishing_plateau": demo.verdict == "FAIL-CONFIRMED"}
    probes = config.get("probes", [])
    plateaus = {}
    for probe in probes:
        scan = profile_limit_scan(space, space.index_of(float(probe)), t_list,
                              schedule, operator)
        plateaus[str(probe)] = scan.plateau
    if len(probes) >= 2:
        a, b = (float(p) for p in probes[:2])
        ratio = plateaus[str(probes[0])] / plateaus[str(probes[1])]
        oracle = profile.at(a) / profile.at(b)
        measured["plateau_ratio"] = ratio
        measured["profile_ratio"] = oracle
        checks["profile_ratio_match"] = abs(ratio / oracle - 1.0) <= config.get(
            "ratio_tolerance", 0.15
        )
    if plateaus:
        measured["plateaus"] = plateaus
    return {
        "checks": checks,
        "measured": measured,
        "verifies": ["two_ended_supnorm_failure", "scaled_kernel_profile_limit"],
    }


def run_acceptance_all(config: dict, outdir: Path) -> dict:
    ids = config.get("criteria")
    results = run_all(outdir, ids=[int(i) for i in ids] if ids else None)
    return {
        "checks": {f"criterion_{r.cid:02d}_{r.name}": r.passed for r in results},
        "measured": {f"criterion_{r.cid:02d}": r.measured for r in results},
        "verifies": ["acceptance_battery"],
    }


EXPERIMENTS = {
    "kernel_accuracy": run_kernel_accuracy,
    "estimates": run_estimates,
    "envelope": run_envelope,
    "concentration": run_concentration,
    "convergence": run_convergence,
    "counterexample": run_counterexample,
    "acceptance_all": run_acceptance_all,
}


def _output_root(value: str | None) -> Path:
    return Path(value or os.environ.get(OUTPUT_ROOT_ENV, DEFAULT_OUTPUT_ROOT))


def _checksums(outdir: Path) -> dict[str, str]:
    import hashlib

    sums = {}
    for path in sorted(outdir.glob("*.csv")):
        sums[path.name] = hashlib.sha256(path.read_bytes()).hexdigest()
    return sums


def _execute(experiment: str, config: dict, outdir: Path) -> int:
    started = time.time()
    outdir.mkdir(parents=True, exist_ok=True)
    outcome = EXPERIMENTS[experiment](config, outdir)
    write_manifest(
        outdir / "manifest.json",
        {
            "experiment": experiment,
            "config": config,
            "seed": config.get("seed", 0),
            "checks": outcome["checks"],
            "measured": outcome["measured"],
            "verifies": outcome["verifies"],
            "artifact_sha256": _checksums(outdir),
            "wall_time_s": time.time() - started,
        },
    )
    failed = [name for name, ok in outcome["checks"].items() if not ok]
    if failed:
        print(f"FAILED checks: {', '.join(failed)}", file=sys.stderr)
        return EXIT_CHECK_FAILED
    return EXIT_OK


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="heatlab", description="heat-flow experiment runner"
    )
    sub = parser.add_subparsers(dest="command", required=True)

    run_p = sub.add_parser("run", help="run one experiment from a JSON config")
    run_p.add_argument("config", help="path to the experiment config")
    run_p.add_argument("--output-root", default=None)

    acc_p = sub.add_parser("acceptance", help="run the acceptance battery")
    acc_p.add_argument("--output-root", default=None)
    acc_p.add_argument("--criteria", default=None,
                       help="comma-separated criterion ids (default: all)")

    sub.add_parser("list-experiments", help="list known experiment ids")

    args = parser.parse_args(argv)

    if args.command == "list-experiments":
        for name in sorted(EXPERIMENTS):
            print(name)
        return EXIT_OK

    if args.command == "acceptance":
        config = {"experiment": "acceptance_all"}
        if args.criteria:
            try:
                config["criteria"] = [int(tok) for tok in args.criteria.split(",")]
            except ValueError:
                print(f"bad --criteria value: {args.criteria!r}", file=sys.stderr)
                return EXIT_CONFIG
            unknown = set(config["criteria"]) - set(CRITERIA)
            if unknown:
                print(f"unknown criteria: {sorted(unknown)}", file=sys.stderr)
                return EXIT_CONFIG
        outdir = _output_root(args.output_root) / "acceptance"
        return _dispatch("acceptance_all", config, outdir)

    try:
        with open(args.config) as fh:
            config = json.load(fh)
    except OSError as exc:
        print(f"cannot read config: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except json.JSONDecodeError as exc:
        print(f"config is not valid JSON: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    if not isinstance(config, dict):
        print("config must be a JSON object", file=sys.stderr)
        return EXIT_CONFIG
    experiment = config.get("experiment")
    if experiment not in EXPERIMENTS:
        print(
            f"unknown experiment {experiment!r}; try: {', '.join(sorted(EXPERIMENTS))}",
            file=sys.stderr,
        )
        return EXIT_CONFIG
    outdir = _output_root(args.output_root) / config.get("output_dir", experiment)
    return _dispatch(experiment, config, outdir)


def _dispatch(experiment: str, config: dict, outdir: Path) -> int:
    try:
        return _execute(experiment, config, outdir)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except PreconditionError as exc:
        print(f"precondition violated: {exc}", file=sys.stderr)
        return EXIT_PRECONDITION
    except NumericalAbort as exc:
        print(f"numerical abort: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL


if __name__ == "__main__":
    sys.exit(main())
