import json

import pytest

from heatlab.cli import (
    EXIT_CHECK_FAILED,
    EXIT_CONFIG,
    EXIT_NUMERICAL,
    EXIT_OK,
    EXIT_PRECONDITION,
    main,
)

SMALL_SPACE = {"kind": "euclidean_radial", "n": 2, "extent": 15.0, "points": 1500}


def write_config(tmp_path, doc, name="config.json"):
    path = tmp_path / name
    path.write_text(json.dumps(doc))
    return str(path)


def test_list_experiments(capsys):
    assert main(["list-experiments"]) == EXIT_OK
    out = capsys.readouterr().out.split()
    assert "kernel_accuracy" in out
    assert "acceptance_all" in out


def test_missing_config_file(tmp_path):
    assert main(["run", str(tmp_path / "nope.json")]) == EXIT_CONFIG


def test_malformed_json(tmp_path):
    path = tmp_path / "bad.json"
    path.write_text("{not json")
    assert main(["run", str(path)]) == EXIT_CONFIG


def test_unknown_experiment(tmp_path):
    cfg = write_config(tmp_path, {"experiment": "warp_drive", "space": SMALL_SPACE})
    assert main(["run", cfg]) == EXIT_CONFIG


def test_bad_space_config(tmp_path):
    cfg = write_config(
        tmp_path,
        {"experiment": "kernel_accuracy", "space": {"kind": "euclidean_radial", "n": 1,
                                                    "extent": 15.0, "points": 1500}},
    )
    assert main(["run", cfg]) == EXIT_CONFIG


def test_precondition_exit_code(tmp_path):
    # t too large for the extent: kernel preconditions fire
    cfg = write_config(
        tmp_path,
        {"experiment": "kernel_accuracy", "space": SMALL_SPACE, "t": 100.0},
    )
    assert main(["run", cfg, "--output-root", str(tmp_path / "out")]) == EXIT_PRECONDITION


def test_numerical_abort_exit_code(tmp_path):
    cfg = write_config(
        tmp_path,
        {
            "experiment": "convergence",
            "space": SMALL_SPACE,
            "u0": {"profile": "triangle", "center": 0.0, "halfwidth": 1.0},
            "t_list": [100.0, 10000.0],
        },
    )
    assert main(["run", cfg, "--output-root", str(tmp_path / "out")]) == EXIT_NUMERICAL


def test_check_failure_exit_code(tmp_path):
    cfg = write_config(
        tmp_path,
        {"experiment": "kernel_accuracy", "space": SMALL_SPACE, "t": 1.0,
         "tolerance": 1e-12},
    )
    assert main(["run", cfg, "--output-root", str(tmp_path / "out")]) == EXIT_CHECK_FAILED


def test_kernel_accuracy_run_and_manifest(tmp_path):
    import hashlib

    out_root = tmp_path / "out"
    cfg = write_config(
        tmp_path,
        {"experiment": "kernel_accuracy", "space": SMALL_SPACE, "t": 1.0, "seed": 7},
    )
    assert main(["run", cfg, "--output-root", str(out_root)]) == EXIT_OK
    run_dir = out_root / "kernel_accuracy"
    manifest = json.loads((run_dir / "manifest.json").read_text())
    assert manifest["seed"] == 7
    assert manifest["checks"]["closed_form_agreement"] is True
    assert "verifies" in manifest and manifest["verifies"]
    assert "versions" in manifest
    body = (run_dir / "kernel_slice.csv").read_bytes()
    assert body.splitlines()[0] == b"r,h_numeric,w,h_closed_form"
    assert manifest["artifact_sha256"]["kernel_slice.csv"] == hashlib.sha256(body).hexdigest()


def test_repeat_runs_byte_identical(tmp_path):
    cfg_doc = {
        "experiment": "envelope",
        "space": SMALL_SPACE,
        "c_const": 0.25,
        "t": 1.0,
        "r_list": [2.0, 4.0, 8.0],
    }
    cfg = write_config(tmp_path, cfg_doc)
    first = tmp_path / "first"
    second = tmp_path / "second"
    assert main(["run", cfg, "--output-root", str(first)]) == EXIT_OK
    assert main(["run", cfg, "--output-root", str(second)]) == EXIT_OK
    a = (first / "envelope" / "tail_integrals.csv").read_bytes()
    b = (second / "envelope" / "tail_integrals.csv").read_bytes()
    assert a == b


def test_output_root_env_var(tmp_path, monkeypatch):
    monkeypatch.setenv("HEATLAB_OUTPUT_ROOT", str(tmp_path / "env_root"))
    cfg = write_config(
        tmp_path,
        {"experiment": "envelope", "space": SMALL_SPACE, "t": 1.0,
         "r_list": [2.0, 4.0, 8.0]},
    )
    assert main(["run", cfg]) == EXIT_OK
    assert (tmp_path / "env_root" / "envelope" / "manifest.json").exists()


def test_estimates_experiment(tmp_path):
    out_root = tmp_path / "out"
    cfg = write_config(
        tmp_path,
        {"experiment": "estimates", "space": SMALL_SPACE, "t": 1.0,
         "t_list": [1.0, 2.0], "seed": 0},
    )
    assert main(["run", cfg, "--output-root", str(out_root)]) == EXIT_OK
    run_dir = out_root / "estimates"
    report = json.loads((run_dir / "two_sided.json").read_text())
    assert report["passed"] is True
    assert abs(report["constants"]["amplitude"] - 0.25) < 0.01
    assert (run_dir / "holder.json").exists()
    summary = (run_dir / "summary.csv").read_text().splitlines()
    assert summary[0] == "estimate,constant,value"
    assert any(line.startswith("holder,theta_hat,") for line in summary)


def test_concentration_experiment(tmp_path):
    out_root = tmp_path / "out"
    cfg = write_config(
        tmp_path,
        {"experiment": "concentration", "space": SMALL_SPACE,
         "t_list": [2.0, 4.0, 6.0], "nu_prime": 2.0},
    )
    assert main(["run", cfg, "--output-root", str(out_root)]) == EXIT_OK
    body = (out_root / "concentration" / "concentration.csv").read_text()
    assert body.splitlines()[0] == "t,mass_in,mass_out,phi"


def test_acceptance_subcommand_single_criterion(tmp_path):
    out_root = tmp_path / "out"
    assert main(["acceptance", "--output-root", str(out_root), "--criteria", "4"]) == EXIT_OK
    manifest = json.loads((out_root / "acceptance" / "manifest.json").read_text())
    assert manifest["checks"]["criterion_04_envelope_integrals"] is True
    assert (out_root / "acceptance" / "c04_envelope_integrals.csv").exists()


def test_acceptance_rejects_unknown_criteria(tmp_path):
    assert main(["acceptance", "--criteria", "42"]) == EXIT_CONFIG
    assert main(["acceptance", "--criteria", "one"]) == EXIT_CONFIG
