import numpy as np
import pytest

from twolevel import metrics


def _uniform(a, b):
    return lambda x: np.clip((np.asarray(x) - a) / (b - a), 0, 1)


def test_identical_inputs_are_zero():
    grid = np.linspace(0, 3, 301)
    f = _uniform(0, 2)
    assert metrics.ks_distance(f, f, grid) == 0
    assert metrics.wasserstein1(f, f, grid) == 0
    p = np.array([0.2, 0.3, 0.5])
    assert metrics.tv_distance(p, p) == 0


def test_point_masses():
    assert metrics.tv_distance([1.0, 0.0], [0.0, 1.0]) == 1.0
    grid = np.array([0.0, 1.0])
    assert metrics.wasserstein1(np.array([1.0, 1.0]), np.array([0.0, 1.0]), grid) == 1.0


def test_uniform_ks():
    grid = np.linspace(0, 2, 201)
    assert metrics.ks_distance(_uniform(0, 1), _uniform(0, 2), grid) == pytest.approx(0.5)


def test_uniform_w1_fine_grid():
    grid = np.linspace(0, 2, 20001)
    assert metrics.wasserstein1(_uniform(0, 1), _uniform(0, 2), grid) == pytest.approx(0.5, abs=1e-3)


def test_unnormalized_rejected():
    with pytest.raises(ValueError):
        metrics.tv_distance([0.5, 0.4], [0.5, 0.5])
    with pytest.raises(ValueError):
        metrics.tv_distance([1.2, -0.2], [0.5, 0.5])


def test_tv_pads_shorter():
    assert metrics.tv_distance([0.5, 0.5], [0.5, 0.25, 0.25]) == pytest.approx(0.25)


def test_lattice_grid_resolution():
    g = metrics.lattice_grid(0.1, 1.0)
    assert np.max(np.diff(g)) <= 0.1 / 4 + 1e-15
    assert np.any(np.isclose(g, 0.3 - 1e-10, atol=1e-12))
    with pytest.raises(ValueError):
        metrics.lattice_grid(0.1, 1.0, per_atom=2)


def test_ks_lattice_catches_left_limits():
    # point mass at 1 on lattice r=1 vs uniform on [0, 1]: sup gap is 1 just below 1... and at 0
    cdf = _uniform(0, 1)
    assert metrics.ks_lattice([0.0, 1.0], 1.0, cdf) == pytest.approx(1.0)
    assert metrics.ks_lattice([1.0], 1.0, cdf) == pytest.approx(1.0)
    fine = metrics.ks_lattice(np.full(100, 0.01), 0.01, cdf)
    assert fine == pytest.approx(0.01)
