import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from santalo.errors import SantaloError
from santalo.functional import (
    Convention,
    SantaloReport,
    ball_body,
    compose,
    fm_center,
    functional_product,
    polar_inclusion_check,
    product_hypothesis_check,
)
from santalo.geometry import body_measures
from santalo.quad import integrate_grid
from santalo.transform import GridField, legendre
from santalo.weights import validate_weight

EXP = validate_weight({"kind": "exp"})


def potential(fun, half=8.0, m=129, n=2):
    return GridField.from_function(fun, -half * np.ones(n), half * np.ones(n), m)


def density(fun, half=8.0, m=129, n=2, exact=True):
    return GridField.from_function(fun, -half * np.ones(n), half * np.ones(n), m, outside=0.0, exact=exact)


def half_sq(x):
    return 0.5 * np.sum(x * x, axis=-1)


def test_gaussian_product_is_equality_case():
    rep = functional_product(EXP, potential(half_sq), dual=(-8 * np.ones(2), 8 * np.ones(2)))
    assert rep.product == pytest.approx((2 * math.pi) ** 2, rel=1e-6)
    assert abs(rep.deficit_minus) < 1e-6


def test_constant_shift_leaves_product_unchanged():
    dual = (-8 * np.ones(2), 8 * np.ones(2))
    a = functional_product(EXP, potential(half_sq), dual=dual)
    b = functional_product(EXP, potential(lambda x: half_sq(x) + 0.75), dual=dual)
    assert b.product == pytest.approx(a.product, rel=1e-12)


def test_conventions_have_their_own_references():
    dual = (-8 * np.ones(2), 8 * np.ones(2))
    sq = functional_product(EXP, potential(lambda x: 0.5 * half_sq(x)), convention="square", dual=dual)
    assert sq.reference == pytest.approx(math.pi**2)
    assert abs(sq.deficit_minus) < 1e-5
    with pytest.raises(SantaloError, match="unknown convention"):
        Convention.parse("quarter")


def test_truncated_quadratic_deficit_decreases_with_cutoff():
    eps = []
    for cut in (2.0, 3.0, 4.0):
        phi = potential(lambda x, c=cut: np.where(np.sum(x * x, axis=-1) <= c * c, half_sq(x), np.inf), m=257)
        rep = functional_product(EXP, phi, dual=(-8 * np.ones(2), 8 * np.ones(2)))
        eps.append(rep.deficit_minus)
    assert eps[0] > eps[1] > eps[2] > 0


def test_report_invariants():
    rep = SantaloReport.build("half-square", [0.0], 2.0, 3.0, 7.0)
    assert rep.deficit_minus == pytest.approx(1 - 6 / 7)
    assert rep.deficit_minus <= rep.deficit_plus
    with pytest.raises(SantaloError, match="degenerate pair"):
        SantaloReport.build("square", [0.0], 0.0, 1.0, 1.0)


def test_xi_gauge_invariance():
    rep = SantaloReport.build("square", [0.0, 0.0], 2.0 * 3.7, 5.0 / 3.7, 11.0)
    ref = SantaloReport.build("square", [0.0, 0.0], 2.0, 5.0, 11.0)
    assert rep.product == pytest.approx(ref.product, rel=1e-12)
    assert rep.deficit_minus == pytest.approx(ref.deficit_minus, abs=1e-12)


def test_linear_image_leaves_product_unchanged():
    T = np.diag([1.25, 0.8])
    dual = (-14 * np.ones(2), 14 * np.ones(2))
    a = functional_product(EXP, potential(half_sq, half=10.0, m=257), dual=dual)
    b = functional_product(EXP, potential(lambda x: half_sq(x @ T), half=10.0, m=257), dual=dual)
    # both sides carry an O(h^2) discretization error of about 1e-4
    assert b.product == pytest.approx(a.product, rel=2e-4)


def gaussian_pair(m=16, half=3.0):
    f = density(lambda x: np.exp(-np.sum(x * x, axis=-1)), half, m)
    return f, f


def test_hypothesis_check_examples():
    f, g = gaussian_pair()
    margin = product_hypothesis_check(EXP, f, g)
    assert margin >= -1e-9
    xs = f.points().reshape(-1, 2)
    s = xs @ xs.T
    lf = np.log(f.values.reshape(-1))
    brute = np.min(np.where(s > 0, -2 * s - lf[:, None] - lf[None, :], np.inf))
    assert margin == pytest.approx(brute, abs=1e-12)
    doubled = f.with_values(2 * f.values)
    assert product_hypothesis_check(EXP, doubled, g) == pytest.approx(margin - math.log(2), abs=1e-12)


@given(st.integers(0, 10_000))
def test_composed_pair_satisfies_hypothesis(seed):
    g = np.random.default_rng(seed)
    A = g.normal(size=(2, 2))
    A = A @ A.T + 0.3 * np.eye(2)
    c = g.normal(size=2) * 0.3
    phi = potential(lambda x: 0.5 * np.einsum("...i,ij,...j", x - c, A, x - c), half=3.0, m=16)
    psi = legendre(phi)
    f = compose(EXP, phi)
    gg = compose(EXP, psi)
    assert product_hypothesis_check(EXP, f, gg, convention="half-square") >= -1e-9


def test_ball_body_of_gaussian_is_unit_ball():
    f = density(lambda x: np.exp(-half_sq(x)), 10.0, 65)
    k = ball_body(f)
    assert np.allclose(k.radii, 1.0, atol=1e-9)
    assert integrate_grid(density(lambda x: np.exp(-half_sq(x)), 10.0, 201, exact=False)) == pytest.approx(
        2 * body_measures(k).volume, rel=1e-6
    )


def test_ball_body_of_indicator():
    f = density(lambda x: (np.sum(x * x, axis=-1) <= 1).astype(float), 2.0, 65)
    k = ball_body(f)
    assert np.allclose(k.radii, math.sqrt(0.5), atol=1e-9)


def test_fm_center_of_even_and_shifted_gaussians():
    even = density(lambda x: np.exp(-half_sq(x)), 8.0, 65)
    assert np.linalg.norm(fm_center(even).z) < 1e-8
    v = np.array([0.7, -0.4])
    moved = density(lambda x: np.exp(-half_sq(x - v)), 8.0, 65)
    assert np.allclose(fm_center(moved).z, v, atol=1e-7)


def test_fm_center_one_dimensional_skewed_density():
    def phi(x):
        x = x[..., 0]
        return np.where(x >= 0, 0.5 * x * x, 2.0 * x * x)

    f = GridField.from_function(lambda x: np.exp(-phi(x)), [-10.0], [10.0], 2001, outside=0.0)
    z = fm_center(f, tol=1e-10).z[0]

    # independent oracle: centroid of the segment [z - a(z), z + b(z)] sits at z
    def offset(t):
        xs = np.linspace(0, 20, 200_001)
        right = np.trapezoid(np.exp(-phi((t + xs)[:, None])) * (t + xs <= 10), xs)
        left = np.trapezoid(np.exp(-phi((t - xs)[:, None])) * (t - xs >= -10), xs)
        return 0.5 * (right - left)

    lo, hi = -2.0, 2.0
    for _ in range(60):
        mid = 0.5 * (lo + hi)
        if offset(lo) * offset(mid) <= 0:
            hi = mid
        else:
            lo = mid
    assert z == pytest.approx(0.5 * (lo + hi), abs=1e-6)
    assert z > 0


def test_polar_inclusion_examples():
    f, g = gaussian_pair(m=129, half=8.0)
    assert polar_inclusion_check(f, g, w=EXP) == pytest.approx(0.0, abs=1e-6)
    assert polar_inclusion_check(f, g) <= 0
    half_f = f.with_values(0.5 * f.values)
    assert polar_inclusion_check(half_f, g, w=EXP) < -1e-3
    T = np.diag([2.0, 0.5])
    ft = density(lambda x: np.exp(-np.sum((x @ T) ** 2, axis=-1)), 8.0, 129)
    gt = density(lambda x: np.exp(-np.sum((x @ np.linalg.inv(T)) ** 2, axis=-1)), 8.0, 129)
    assert polar_inclusion_check(ft, gt, w=EXP) == pytest.approx(0.0, abs=1e-3)
