import math

import numpy as np
import pytest

from heatlab import (
    PreconditionError,
    ball_volume,
    check_gradient,
    check_time_derivative,
    check_two_sided,
    estimate_holder,
    harmonic_profile,
    kernel_series,
    envelope_integrals,
    envelope_tail_scan,
)
from heatlab.counterexample import profile_limit_scan
from heatlab.estimates import neck_gradient_scan


class TestTwoSided:
    def test_flat_model_anchors(self, euclid2d, euclid2d_op):
        # V(0, sqrt t) h_t = (1/4) exp(-d^2 / 4t) in the plane
        report = check_two_sided(euclid2d, 0, [1.0, 2.0], operator=euclid2d_op)
        assert report.passed
        assert report.constants["amplitude"] == pytest.approx(0.25, abs=0.01)
        assert report.constants["slope"] == pytest.approx(-0.25, abs=0.01)
        assert report.residual_stats["r2"] >= 0.99
        assert report.constants["c1"] <= report.constants["C2"]
        assert report.constants["c2"] <= report.constants["C1"]

    def test_peak_column_constant_in_time(self, euclid2d, euclid2d_op):
        series = kernel_series(euclid2d, 0, [1.0, 2.0, 4.0], operator=euclid2d_op)
        for sl in series:
            scaled = sl.values[0] * ball_volume(euclid2d, 0.0, math.sqrt(sl.t))
            assert scaled == pytest.approx(0.25, rel=0.01)

    def test_self_similar_profile(self, euclid2d, euclid2d_op):
        # doubling t at fixed d^2/t leaves V h unchanged within 2%
        s1, s2 = kernel_series(euclid2d, 0, [1.0, 2.0], operator=euclid2d_op)
        for x in (1.0, 4.0, 9.0):
            v1 = np.interp(math.sqrt(x * s1.t), euclid2d.r, s1.values) * ball_volume(
                euclid2d, 0.0, math.sqrt(s1.t)
            )
            v2 = np.interp(math.sqrt(x * s2.t), euclid2d.r, s2.values) * ball_volume(
                euclid2d, 0.0, math.sqrt(s2.t)
            )
            assert v1 == pytest.approx(v2, rel=0.02)


class TestTimeDerivative:
    def test_scaled_ratio_at_source(self, euclid2d, euclid2d_op):
        report = check_time_derivative(euclid2d, 0, 1.0, operator=euclid2d_op)
        assert report.constants["ratio_at_zero"] == pytest.approx(0.25, abs=0.01)
        assert report.passed

    def test_ratio_time_independent(self, euclid2d, euclid2d_op):
        r1 = check_time_derivative(euclid2d, 0, 1.0, operator=euclid2d_op)
        r2 = check_time_derivative(euclid2d, 0, 2.0, operator=euclid2d_op)
        assert r1.constants["ratio_at_zero"] == pytest.approx(
            r2.constants["ratio_at_zero"], rel=0.02
        )

    def test_tail_decay_rate_below_quarter(self, euclid2d, euclid2d_op):
        report = check_time_derivative(euclid2d, 0, 1.0, operator=euclid2d_op)
        assert report.constants["c"] <= 0.25 * 1.05


class TestGradient:
    def test_flat_model_peak(self, euclid2d, euclid2d_op):
        # maximize sqrt(t) V |d_r h| = (xi/8) exp(-xi^2/4) over xi = r/sqrt(t)
        oracle = (math.sqrt(2.0) / 8.0) * math.exp(-0.5)
        report = check_gradient(euclid2d, 0, 1.0, operator=euclid2d_op)
        assert report.constants["max_scaled"] == pytest.approx(oracle, rel=0.01)
        assert report.passed

    def test_vanishes_at_the_pole(self, euclid2d, euclid2d_op):
        (sl,) = kernel_series(euclid2d, 0, [1.0], operator=euclid2d_op)
        one_sided = (sl.values[1] - sl.values[0]) / euclid2d.h
        # even kernel around the pole: flat to second order
        assert abs(one_sided) <= 0.02 * np.abs(np.gradient(sl.values, euclid2d.h)).max()

    def test_dumbbell_report_mode(self, dumbbell, dumbbell_op):
        report = check_gradient(dumbbell, dumbbell.index_of(1.0), 4.0, operator=dumbbell_op)
        assert report.passed is None
        assert any("report-only" in flag for flag in report.flags)

    def test_neck_scan_floor_and_growth(self, dumbbell, dumbbell_op):
        # the profile-scaled gradient sup stays above a floor calibrated
        # from the harmonic profile slope via the scan's own normalization
        t_list = [20.0, 40.0, 80.0]
        scan = neck_gradient_scan(dumbbell, t_list, operator=dumbbell_op)
        profile = harmonic_profile(dumbbell)
        limit = profile_limit_scan(dumbbell, dumbbell.index_of(2.0), t_list, operator=dumbbell_op)
        normalization = limit.plateau / profile.at(2.0)
        neck = np.abs(dumbbell.r) <= 2.0
        slope = np.abs(np.gradient(profile.values, dumbbell.r))[neck].max()
        assert scan.sup_profile.min() >= 0.5 * normalization * slope
        # the envelope-bound scaling keeps growing: the bound degrades
        assert np.all(np.diff(scan.sup_env) > 0)


class TestHolder:
    def test_flat_model_is_lipschitz(self, euclid2d, euclid2d_op):
        report = estimate_holder(euclid2d, 0, 1.0, operator=euclid2d_op)
        assert 0.9 <= report.constants["theta_hat"] <= 1.05
        assert report.passed

    def test_small_separation_linear(self, euclid2d, euclid2d_op):
        report = estimate_holder(euclid2d, 0, 1.0, offsets=(1, 2, 4), operator=euclid2d_op)
        x, y = report.samples["log_delta_over_sqrt_t"], report.samples["log_peak_increment"]
        doubling_gain = (y[1] - y[0]) / (x[1] - x[0])
        assert doubling_gain == pytest.approx(1.0, abs=0.1)

    def test_dumbbell_reports_only(self, dumbbell, dumbbell_op):
        report = estimate_holder(dumbbell, dumbbell.index_of(0.0), 4.0, operator=dumbbell_op)
        assert report.passed is None
        assert 0.0 < report.constants["theta_hat"] <= 1.05


class TestEnvelopeIntegrals:
    def test_flat_full_integral(self, euclid2d):
        # (pi t / c)^{n/2} / V(0, sqrt t) = 1/c for n = 2
        result = envelope_integrals(euclid2d, 0.0, 0.25, 1.0, 1.0)
        assert result.full_integral == pytest.approx(4.0, abs=0.02)
        assert result.boundary_ok

    def test_tail_below_full(self, euclid2d):
        result = envelope_integrals(euclid2d, 0.0, 0.25, 1.0, 1.0)
        assert 0.0 < result.tail_integral <= result.full_integral
        assert set(result.tail_ratios) == {1, 2, 4}

    def test_tail_domain_monotone(self, euclid2d):
        radii = np.linspace(1.0, 8.0, 8)
        tails = [
            envelope_integrals(euclid2d, 0.0, 0.25, 1.0, r).tail_integral for r in radii
        ]
        assert np.all(np.diff(tails) <= 0)

    def test_tail_slope_beats_every_power(self, euclid2d):
        scan = envelope_tail_scan(euclid2d, 0.0, 0.25, 1.0, np.geomspace(2.0, 10.0, 8))
        assert scan.slope <= -4.0

    def test_rejects_bad_inputs(self, euclid2d):
        with pytest.raises(PreconditionError):
            envelope_integrals(euclid2d, 0.0, -1.0, 1.0, 1.0)
        with pytest.raises(PreconditionError):
            envelope_integrals(euclid2d, 0.0, 0.25, 4.0, 1.0)  # r < sqrt(t)

    def test_truncation_bias_flagged(self, small_euclid2d):
        # at t = 4 the envelope is still 8e-7 of its peak at r = 15
        result = envelope_integrals(small_euclid2d, 0.0, 0.25, 4.0, 2.0)
        assert not result.boundary_ok
