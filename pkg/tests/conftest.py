import pytest

from heatlab import build_operator, build_space


@pytest.fixture(scope="session")
def euclid2d():
    """Flat half-line model, n = 2: the closed-form workhorse (h = 0.01)."""
    return build_space("euclidean_radial", 2, 40.0, 4000)


@pytest.fixture(scope="session")
def euclid2d_op(euclid2d):
    return build_operator(euclid2d)


@pytest.fixture(scope="session")
def small_euclid2d():
    """Cheaper flat model for solver-level tests (same spacing, L = 15)."""
    return build_space("euclidean_radial", 2, 15.0, 1500)


@pytest.fixture(scope="session")
def small_euclid2d_op(small_euclid2d):
    return build_operator(small_euclid2d)


@pytest.fixture(scope="session")
def dumbbell():
    """Two-ended model, n = 3, R = 1, resolved out to t = 100."""
    return build_space("dumbbell_line", 3, 60.0, 3000, neck_radius=1.0)


@pytest.fixture(scope="session")
def dumbbell_op(dumbbell):
    return build_operator(dumbbell)
