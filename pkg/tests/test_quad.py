import math

import numpy as np
import pytest

from santalo.quad import QuadratureSpec, integrate_1d, integrate_grid, integrate_mc, integrate_radial
from santalo.transform import GridField


def gauss(x):
    return np.exp(-0.5 * np.sum(x * x, axis=-1))


@pytest.mark.parametrize("n", [1, 2, 3, 4])
def test_radial_gaussian(n):
    res = integrate_radial(gauss, n)
    assert res.value == pytest.approx((2 * math.pi) ** (n / 2), rel=1e-9)
    assert res.warning is None


def test_one_dimensional_examples():
    assert integrate_1d(lambda t: np.exp(-t), 0, np.inf).value == pytest.approx(1.0, abs=1e-12)
    assert integrate_1d(lambda t: t**3, 0, 2).value == pytest.approx(4.0, abs=1e-12)
    res = integrate_1d(lambda t: np.abs(t - 0.3), 0, 1, points=[0.3])
    assert res.value == pytest.approx(0.29, abs=1e-12)


def test_vector_valued_integrand():
    res = integrate_1d(lambda t: np.array([1.0, t, t * t]), 0, 1)
    assert np.allclose(res.value, [1, 0.5, 1 / 3])


def test_grid_gaussian_and_refinement_ratio():
    errs = []
    for m in (33, 65, 129):
        f = GridField.from_function(gauss, [-8.0, -8.0], [8.0, 8.0], m, outside=0.0)
        errs.append(abs(integrate_grid(f) - 2 * math.pi))
    assert errs[-1] < 1e-9
    f = GridField.from_function(lambda x: np.exp(-np.abs(x).sum(axis=-1)), [-3.0, -3.0], [3.0, 3.0], 33, outside=0.0)
    g = GridField.from_function(lambda x: np.exp(-np.abs(x).sum(axis=-1)), [-3.0, -3.0], [3.0, 3.0], 65, outside=0.0)
    exact = (2 * (1 - math.exp(-3))) ** 2
    ratio = abs(integrate_grid(f) - exact) / abs(integrate_grid(g) - exact)
    assert 3.0 <= ratio <= 5.0


def test_grid_with_weight_map():
    f = GridField.from_function(lambda x: 0.5 * np.sum(x * x, axis=-1), [-8.0, -8.0], [8.0, 8.0], 129)
    assert integrate_grid(f, lambda v: np.exp(-v)) == pytest.approx(2 * math.pi, rel=1e-9)


def test_monte_carlo_is_deterministic_and_accurate():
    spec = QuadratureSpec(method="monte-carlo", max_evals=200_000, seed=3)
    a = integrate_mc(gauss, ("box", [-6, -6], [6, 6]), spec)
    b = integrate_mc(gauss, ("box", [-6, -6], [6, 6]), spec)
    assert a == b
    est, err = a
    assert abs(est - 2 * math.pi) < 5 * err
    ball = integrate_mc(lambda x: np.ones(x.shape[:-1]), ("ball", [0.0, 0.0, 0.0], 1.0), spec)
    assert ball[0] == pytest.approx(4 * math.pi / 3, rel=1e-12)


def test_methods_agree():
    f = GridField.from_function(gauss, [-8.0] * 3, [8.0] * 3, 65, outside=0.0)
    grid = integrate_grid(f)
    rad = integrate_radial(gauss, 3).value
    mc, err = integrate_mc(gauss, ("box", [-8] * 3, [8] * 3), QuadratureSpec(method="monte-carlo", max_evals=400_000))
    assert grid == pytest.approx(rad, rel=1e-8)
    assert abs(mc - rad) < 5 * err


def test_spec_validation():
    with pytest.raises(ValueError):
        QuadratureSpec(method="simpson")
    with pytest.raises(ValueError):
        QuadratureSpec(tol=0)


def test_budget_warning():
    res = integrate_1d(lambda t: np.sin(1 / np.maximum(t, 1e-300)), 0, 1, QuadratureSpec(max_evals=150))
    assert res.warning is not None
