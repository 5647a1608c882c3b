import numpy as np
import pytest
from hypothesis import given, strategies as st
from hypothesis.extra.numpy import arrays

from santalo.errors import EmptyDomainError, SantaloError
from santalo.transform import (
    CONVEX,
    GridField,
    biconjugate,
    boundary_effect_radius,
    conjugate_1d_bruteforce,
    conjugate_values,
    fenchel_young_gap,
    interpolate,
    legendre,
)


def half_sq(x):
    return 0.5 * np.sum(x * x, axis=-1)


def quad_field(half=4.0, m=81, n=2, shift=0.0):
    return GridField.from_function(lambda x: half_sq(x) + shift, -half * np.ones(n), half * np.ones(n), m)


def test_quadratic_is_self_dual():
    psi = legendre(quad_field(), np.zeros(2), dual=(-4 * np.ones(2), 4 * np.ones(2)))
    pts = psi.points()
    inner = np.all(np.abs(pts) <= 2.0, axis=-1)
    err = np.abs(psi.values - half_sq(pts))[inner]
    h = float(psi.steps.max())
    assert err.max() <= h * h
    assert psi.convex_flag == CONVEX


def test_cube_indicator_gives_l1_norm():
    phi = GridField.from_function(lambda x: np.zeros(x.shape[:-1]), [-1.0, -1.0], [1.0, 1.0], 11)
    psi = legendre(phi, None, dual=([-3.0, -3.0], [3.0, 3.0]), shape=(13, 13))
    assert np.allclose(psi.values, np.abs(psi.points()).sum(axis=-1), atol=1e-12)


def test_anisotropic_quadratic_conjugate_at_one_one():
    phi = GridField.from_function(lambda x: x[..., 0] ** 2 + x[..., 1] ** 2 / 4, [-6.0, -6.0], [6.0, 6.0], 241)
    psi = legendre(phi, None, dual=([-2.0, -2.0], [2.0, 2.0]), shape=(41, 41))
    assert float(psi(np.array([1.0, 1.0]))) == pytest.approx(1.25, abs=1e-3)


@given(
    arrays(np.float64, st.integers(4, 40), elements=st.floats(-5, 5)),
    st.floats(-3, 3),
    st.floats(0.1, 3),
)
def test_fast_conjugate_matches_bruteforce(vals, ylo, width):
    x = np.linspace(-1.0, 1.0, vals.size)
    y = np.linspace(ylo, ylo + width, 17)
    fast = conjugate_values(vals, [x], [y])
    slow = conjugate_1d_bruteforce(x, vals, y)
    assert np.allclose(fast, slow, rtol=0, atol=1e-12)


def test_fast_conjugate_with_infinities(rng):
    x = np.linspace(-2, 2, 30)
    for _ in range(50):
        v = rng.normal(size=30)
        v[rng.random(30) < 0.4] = np.inf
        v[0] = 0.0
        y = np.linspace(-5, 5, 21)
        assert np.allclose(conjugate_values(v, [x], [y]), conjugate_1d_bruteforce(x, v, y), atol=1e-12)


def test_shift_rule():
    a = legendre(quad_field())
    b = legendre(quad_field(shift=2.5), dual=(a.lo, a.hi))
    assert np.allclose(b.values, a.values - 2.5, atol=1e-12)


def test_order_reversal():
    a = legendre(quad_field())
    b = legendre(quad_field(shift=0.7), dual=(a.lo, a.hi))
    assert np.all(a.values >= b.values)


def test_center_translation():
    z = np.array([0.5, -0.25])
    phi = quad_field()
    lz = legendre(phi, z, dual=(-3 * np.ones(2), 3 * np.ones(2)), shape=(25, 25))
    moved = GridField(phi.lo - z, phi.hi - z, phi.values)
    l0 = legendre(moved, None, dual=(lz.lo - z, lz.hi - z), shape=(25, 25))
    assert np.allclose(lz.values, l0.values, atol=1e-12)


def test_linear_map_covariance():
    T = np.diag([2.0, 0.5])
    dual = ([-3.0, -3.0], [3.0, 3.0])
    phi_t = GridField.from_function(lambda x: half_sq(x @ T), [-8.0, -8.0], [8.0, 8.0], 161)
    lt = legendre(phi_t, None, dual=dual, shape=(31, 31))
    y = lt.points()
    expected = half_sq(y @ np.linalg.inv(T))
    # maximizers stay inside the primal box for |y| <= 1.5
    inner = np.all(np.abs(y) <= 1.5, axis=-1)
    # sampling error of a quadratic of curvature 4 at step h is at most 4 h^2 / 8
    h = float(phi_t.steps.max())
    assert np.max(np.abs(lt.values - expected)[inner]) <= 0.5 * h * h * (1 + 1e-9)


def test_biconjugate_of_convex_field_is_itself():
    phi = quad_field(m=41)
    star = biconjugate(phi)
    assert np.max(np.abs(star.values - phi.values)) < 1e-9


def test_biconjugate_double_well():
    x = np.linspace(-2, 2, 401)
    phi = GridField([-2.0], [2.0], (x * x - 1) ** 2)
    star = biconjugate(phi)
    target = np.where(np.abs(x) <= 1, 0.0, (x * x - 1) ** 2)
    assert np.max(np.abs(star.values - target)) < 2e-2
    again = biconjugate(star)
    assert np.max(np.abs(again.values - star.values)) < 1e-9
    assert np.all(star.values <= phi.values + 1e-12)


def test_biconjugate_removes_spike():
    phi = quad_field(m=41)
    vals = phi.values.copy()
    vals[20, 20] = vals[18, 22] = np.inf
    star = biconjugate(phi.with_values(vals))
    h = float(phi.steps.max())
    assert np.all(np.isfinite(star.values))
    assert np.max(np.abs(star.values - phi.values)) <= 0.5 * h * h + 1e-12


def test_biconjugate_keeps_effective_domain():
    phi = GridField.from_function(
        lambda x: np.where(np.all(np.abs(x) <= 1, axis=-1), 0.0, np.inf), [-2.0, -2.0], [2.0, 2.0], 21
    )
    star = biconjugate(phi)
    assert np.array_equal(np.isfinite(star.values), np.isfinite(phi.values))


def test_fenchel_young_examples():
    phi = quad_field(m=41)
    assert fenchel_young_gap(phi, phi) == pytest.approx(0.0, abs=1e-12)
    assert fenchel_young_gap(phi, quad_field(m=41, shift=1.0)) == pytest.approx(1.0, abs=1e-12)


@given(st.integers(0, 10_000))
def test_fenchel_young_against_pair_enumeration(seed):
    g = np.random.default_rng(seed)
    A = g.normal(size=(2, 2))
    A = A @ A.T + 0.2 * np.eye(2)
    phi = GridField.from_function(lambda x: 0.5 * np.einsum("...i,ij,...j", x, A, x), [-1.0, -1.0], [1.0, 1.0], 16)
    psi = legendre(phi)
    gap = fenchel_young_gap(phi, psi)
    x = phi.points().reshape(-1, 2)
    y = psi.points().reshape(-1, 2)
    brute = np.min(phi.values.reshape(-1)[:, None] + psi.values.reshape(-1)[None, :] - x @ y.T)
    assert gap == pytest.approx(brute, abs=1e-12)
    assert gap >= -1e-9


def test_boundary_effect_radius_is_positive():
    assert boundary_effect_radius(quad_field()) > 0


def test_interpolation_propagates_infinity():
    vals = np.zeros((5, 5))
    vals[2, 2] = np.inf
    f = GridField([0.0, 0.0], [4.0, 4.0], vals)
    assert np.isinf(interpolate(f, np.array([[1.5, 1.5]])))[0]
    assert interpolate(f, np.array([[0.5, 0.5]]))[0] == 0.0


@pytest.mark.parametrize(
    "kwargs, match",
    [
        (dict(lo=[1.0], hi=[0.0], values=np.zeros(5)), "box.min"),
        (dict(lo=[0.0], hi=[1.0], values=np.zeros(3)), "at least 4"),
        (dict(lo=[0.0], hi=[1.0], values=np.array([0, np.nan, 0, 0.0])), "NaN"),
        (dict(lo=[0.0], hi=[1.0], values=np.array([0, -np.inf, 0, 0.0])), "-inf"),
        (dict(lo=[0.0], hi=[1.0], values=np.zeros(5), convex_flag="maybe"), "convex_flag"),
        (dict(lo=[0.0], hi=[1.0], values=np.array([0, 1, 0, 1, 0.0]), convex_flag=CONVEX), "midpoint"),
    ],
)
def test_grid_field_validation(kwargs, match):
    with pytest.raises(SantaloError, match=match):
        GridField(**kwargs)


def test_all_infinite_field_is_rejected():
    with pytest.raises(EmptyDomainError, match="empty effective domain"):
        GridField([0.0], [1.0], np.full(5, np.inf))
