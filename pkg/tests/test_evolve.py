import numpy as np
import pytest

from heatlab import (
    PreconditionError,
    TimeSchedule,
    build_operator,
    build_space,
    evolve_to,
    make_state,
    schedule_for,
    step,
)


@pytest.fixture(scope="module")
def flat_line():
    """Unit density on [-20, 20]: the operator reduces to plain u''."""
    space = build_space("custom_density", 2, 20.0, 2000, density=lambda r: np.ones_like(r))
    return space, build_operator(space)


def test_constants_are_harmonic(euclid2d_op):
    u = np.ones_like(euclid2d_op.w)
    assert np.all(euclid2d_op.apply(u) == 0.0)


def test_second_difference_of_quadratic(flat_line):
    space, op = flat_line
    lu = op.apply(space.r**2)
    assert np.allclose(lu[1:-1], 2.0, atol=5 * space.h**2)


def test_self_adjointness(euclid2d_op):
    # w_i L_{i,i+1} and w_{i+1} L_{i+1,i} are both the face conductance
    w, face = euclid2d_op.w, euclid2d_op.a_face / euclid2d_op.space.h
    upper = face / w[:-1]
    lower = face / w[1:]
    assert np.allclose(w[:-1] * upper, w[1:] * lower, rtol=1e-14)
    rng = np.random.default_rng(1)
    u, v = rng.normal(size=(2, w.size))
    lhs = float(w @ (euclid2d_op.apply(u) * v))
    rhs = float(w @ (u * euclid2d_op.apply(v)))
    assert lhs == pytest.approx(rhs, rel=1e-12, abs=1e-12)


def test_operator_rejects_tiny_grid(euclid2d):
    import dataclasses

    tiny = dataclasses.replace(euclid2d)  # below any buildable grid size
    tiny.npoints = 1
    with pytest.raises(PreconditionError):
        build_operator(tiny)


def test_constants_stationary_under_step(flat_line):
    _, op = flat_line
    state = make_state(op, np.full_like(op.w, 3.5))
    after = step(state, op, 0.7)
    assert np.array_equal(after.values, state.values)


def test_mass_conserved_per_step(euclid2d_op):
    rng = np.random.default_rng(2)
    state = make_state(euclid2d_op, np.abs(rng.normal(size=euclid2d_op.w.size)))
    for dt in (1e-4, 0.01, 1.0, 50.0):
        new = step(state, euclid2d_op, dt)
        scale = float(euclid2d_op.w @ np.abs(new.values))
        assert abs(new.mass - state.mass) <= 1e-12 * scale
        state = new


def test_step_rejects_nonpositive_dt(flat_line):
    _, op = flat_line
    state = make_state(op, np.ones_like(op.w))
    with pytest.raises(PreconditionError):
        step(state, op, 0.0)


def test_gaussian_variance_grows_by_2dt(flat_line):
    space, op = flat_line
    u0 = np.exp(-space.r**2 / 2.0)
    state = make_state(op, u0)

    def variance(values):
        m = float(op.w @ values)
        return float(op.w @ (values * space.r**2)) / m

    dt = 0.01
    after = step(state, op, dt)
    # L r^2 = 2 exactly for unit density, so the growth identity is sharp
    assert variance(after.values) - variance(state.values) == pytest.approx(2 * dt, abs=1e-9)


def test_evolve_restart_is_bit_identical(small_euclid2d, small_euclid2d_op):
    op = small_euclid2d_op
    schedule = schedule_for(small_euclid2d)
    u0 = np.exp(-small_euclid2d.r**2)
    direct = evolve_to(make_state(op, u0), op, 2.0, schedule, snapshot_times=[1.0, 2.0])
    partway = evolve_to(make_state(op, u0), op, 1.0, schedule)
    resumed = evolve_to(partway.state, op, 2.0, schedule)
    assert np.array_equal(direct.snapshots[0].values, partway.state.values)
    assert np.array_equal(direct.snapshots[1].values, resumed.state.values)


def test_delta_run_undershoot_bounded(small_euclid2d, small_euclid2d_op):
    op = small_euclid2d_op
    schedule = schedule_for(small_euclid2d)
    values = np.zeros_like(op.w)
    values[0] = 1.0 / op.w[0]
    state = make_state(op, values)
    for _ in range(schedule.smoothing_steps):
        state = step(state, op, schedule.dt_min)
    result = evolve_to(state, op, 1.0, schedule)
    assert result.undershoot >= -1e-8
    assert result.mass_drift <= 1e-12


def test_even_data_stays_even(dumbbell, dumbbell_op):
    u0 = np.exp(-dumbbell.r**2 / 4.0)
    result = evolve_to(make_state(dumbbell_op, u0), dumbbell_op, 5.0, schedule_for(dumbbell))
    u = result.state.values
    assert np.max(np.abs(u - u[::-1])) <= 1e-12 * u.max()


def test_snapshot_times_validated(small_euclid2d, small_euclid2d_op):
    op = small_euclid2d_op
    state = make_state(op, np.ones_like(op.w))
    with pytest.raises(PreconditionError):
        evolve_to(state, op, 1.0, schedule_for(small_euclid2d), snapshot_times=[2.0])
    with pytest.raises(PreconditionError):
        evolve_to(state, op, 0.0, schedule_for(small_euclid2d))


def test_snapshot_export(small_euclid2d, small_euclid2d_op, tmp_path):
    from heatlab.evolve import export_state

    state = make_state(small_euclid2d_op, np.exp(-small_euclid2d.r**2))
    path = tmp_path / "state.csv"
    export_state(path, small_euclid2d_op, state)
    lines = path.read_text().splitlines()
    assert lines[0] == "r,u,w"
    assert len(lines) == small_euclid2d.npoints + 2
    r0, u0, w0 = (float(tok) for tok in lines[1].split(","))
    assert (r0, u0) == (0.0, 1.0)
    assert w0 == small_euclid2d_op.w[0]


def test_second_order_convergence():
    # halving (h, dt) against the closed-form flat kernel: factor near 4
    from heatlab import euclidean_kernel, numeric_kernel

    errors = []
    for npoints, spd in ((1000, 64), (2000, 128)):
        space = build_space("euclidean_radial", 2, 15.0, npoints)
        schedule = TimeSchedule(dt_min=space.h**2 / 4.0, steps_per_decade=spd)
        sl = numeric_kernel(space, 0, 1.0, schedule)
        ref = euclidean_kernel(2, 1.0, space.r)
        window = space.r <= 4.0
        errors.append(float(np.max(np.abs(sl.values[window] - ref[window]) / ref[window])))
    assert 3.0 <= errors[0] / errors[1] <= 5.0
