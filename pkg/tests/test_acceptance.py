"""Exit criteria, one test per criterion, at their pinned tolerances.

The battery runs once per session; each test re-asserts its criterion's
verdict and prints a pass/fail line with the measured margins.
"""

import pytest

from heatlab.acceptance import CRITERIA, run_all

RUNTIME_CAPS = {1: 60.0, 2: 120.0, 4: 30.0, 6: 300.0, 8: 600.0}


@pytest.fixture(scope="module")
def battery():
    results = run_all()
    return {r.cid: r for r in results}


@pytest.mark.parametrize(
    "cid", sorted(CRITERIA), ids=[f"c{c:02d}_{CRITERIA[c].__doc__.split(chr(10))[0][:40]}" for c in sorted(CRITERIA)]
)
def test_criterion(battery, cid):
    result = battery[cid]
    print(result.summary_line(), result.measured)
    assert result.passed, f"criterion {cid} failed: {result.measured}"
    if cid in RUNTIME_CAPS:
        assert result.seconds <= RUNTIME_CAPS[cid]


def test_battery_complete(battery):
    assert sorted(battery) == sorted(CRITERIA)


def test_specific_margins(battery):
    # spot-check the anchors the battery is built around
    assert battery[1].measured["rel_linf"] <= 1e-3
    assert abs(battery[3].measured["amplitude"] - 0.25) <= 0.01
    assert abs(battery[3].measured["slope"] + 0.25) <= 0.01
    assert abs(battery[4].measured["full_integral"] - 4.0) <= 0.02
    assert abs(battery[5].measured["mass_in_100"] - 0.893) <= 0.01
    assert 0.4 <= battery[6].measured["eta_hat"] <= 0.6
    assert battery[7].measured["wsup_ratio"] <= 0.1
    assert battery[7].measured["interpolation_slack"] <= 1e-6
    assert battery[8].measured["verdict"] == "FAIL-CONFIRMED"
    assert battery[8].measured["control_decay_ratio"] <= 0.2
    assert battery[8].measured["plateau_ratio_rel_dev"] <= 0.15
    assert 3.0 <= battery[9].measured["factor"] <= 5.0
