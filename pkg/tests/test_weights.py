import math

import numpy as np
import pytest

from santalo.errors import NotIntegrableError, NotLogConcaveError, NotNonIncreasingError, SantaloError
from santalo.weights import alpha_star_extend, even_profile, reference_integral, validate_weight, weight_moment

WEIGHTS = [
    {"kind": "exp", "rate": 1.0},
    {"kind": "exp", "rate": 3.0},
    {"kind": "linear", "slope": 0.5},
    {"kind": "gaussian-power", "b": 1.0, "p": 2.0},
    {"kind": "sampled", "t": np.linspace(0, 10, 201).tolist(), "rho": np.exp(-np.linspace(0, 10, 201) ** 1.5).tolist()},
]


def test_exponential_is_fixed_point():
    w = validate_weight({"kind": "exp", "rate": 1.0})
    assert w.nu == 1.0 and w.lam2 == 1.0
    assert w.alpha_prime_0 == 1.0 and w.t0 == 1.0


def test_linear_cutoff_crossing():
    w = validate_weight({"kind": "linear", "slope": 0.5})
    assert w.nu == pytest.approx(1.0) and w.lam2 == pytest.approx(1.0)
    assert w.alpha_prime_0 == pytest.approx(0.5)
    assert 1 - w.t0 / 2 == pytest.approx(math.exp(-w.t0), abs=1e-9)
    assert w.t0 == pytest.approx(1.594, abs=1e-3)


def test_rate_two_is_rescaled():
    w = validate_weight({"kind": "exp", "rate": 2.0})
    assert w.lam2 == pytest.approx(0.5) and w.nu == pytest.approx(1.0)
    t = np.linspace(0, 5, 11)
    assert np.allclose(w.rho(t), np.exp(-t))


@pytest.mark.parametrize("spec", WEIGHTS, ids=lambda s: s["kind"])
def test_normalization_and_invariants(spec):
    w = validate_weight(spec)
    assert float(w.rho(0.0)) == pytest.approx(1.0, abs=1e-9)
    t = np.linspace(0, min(w.support_end, 30.0), 20001)
    assert np.trapezoid(w.rho(t), t) == pytest.approx(1.0, abs=1e-6)
    assert 0 < w.alpha_prime_0 <= 1.0
    a = w.alpha(t[t < w.support_end])
    assert np.all(np.diff(a) >= -1e-12)
    assert np.all(np.diff(a, 2) >= -1e-9)
    diff = w.rho(t) - np.exp(-t)
    assert np.all(diff[(t > 0) & (t < w.t0 - 1e-6)] >= -1e-9)
    assert np.all(diff[t > w.t0 + 1e-6] <= 1e-9)
    for n in range(2, 5):
        assert weight_moment(w, n) <= math.gamma(n / 2) / 2 + 1e-9
    assert weight_moment(w, 2) == pytest.approx(0.5, abs=1e-9)


def test_first_moment_can_exceed_gaussian_value():
    w = validate_weight({"kind": "linear", "slope": 0.5})
    assert weight_moment(w, 1) == pytest.approx(2 * math.sqrt(2) / 3, abs=1e-9)
    assert weight_moment(w, 1) > math.sqrt(math.pi) / 2


@pytest.mark.parametrize("spec", WEIGHTS, ids=lambda s: s["kind"])
def test_normalization_is_idempotent(spec):
    w = validate_weight(spec)
    again = validate_weight(w)
    assert again.nu == pytest.approx(w.nu, rel=1e-12) and again.lam2 == pytest.approx(w.lam2, rel=1e-12)
    assert again.t0 == pytest.approx(w.t0, abs=1e-9)


def test_exponential_moments():
    w = validate_weight({"kind": "exp"})
    assert weight_moment(w, 2) == pytest.approx(0.5, abs=1e-12)
    assert weight_moment(w, 4) == pytest.approx(0.5, abs=1e-12)
    assert weight_moment(w, 1) == pytest.approx(math.sqrt(math.pi) / 2, abs=1e-12)


def test_reference_integrals():
    w = validate_weight({"kind": "exp"})
    assert reference_integral(w, 2, True) == pytest.approx(2 * math.pi)
    assert reference_integral(w, 2, False) == pytest.approx(math.pi)
    assert reference_integral(w, 3, True) == pytest.approx((2 * math.pi) ** 1.5)


def test_alpha_star_extension():
    e = alpha_star_extend(validate_weight({"kind": "exp"}))
    t = np.linspace(-3, 3, 13)
    assert np.allclose(e.rho_star(t), np.exp(-t))
    lin = alpha_star_extend(validate_weight({"kind": "linear", "slope": 0.5}))
    assert float(lin.alpha_star(-1.0)) == pytest.approx(-0.5)
    assert float(lin.rho_star(-1.0)) == pytest.approx(math.exp(0.5))
    assert float(lin.alpha_star(0.0)) == 0.0
    s = np.linspace(-3, 1.9, 500)
    slopes = np.diff(lin.alpha_star(s)) / np.diff(s)
    assert np.all(slopes >= lin.slope0 - 1e-12)


def test_not_log_concave():
    t = np.linspace(0, 4, 41)
    rho = 0.5 * np.exp(-t) + 0.5 * np.exp(-5 * t)
    rho = np.exp(-t) * (1 + 0.3 * np.sin(3 * t) ** 2)
    with pytest.raises(SantaloError):
        validate_weight({"kind": "sampled", "t": t, "rho": rho})
    with pytest.raises(NotLogConcaveError, match="not log-concave"):
        validate_weight({"kind": "gaussian-power", "b": 1.0, "p": 0.5})


def test_not_non_increasing():
    t = np.linspace(0, 4, 41)
    with pytest.raises(NotNonIncreasingError, match="not non-increasing"):
        validate_weight({"kind": "sampled", "t": t, "rho": np.exp(0.5 * t - t * t)})


def test_not_integrable():
    with pytest.raises(NotIntegrableError, match="not integrable"):
        validate_weight(lambda t: np.ones_like(np.asarray(t, dtype=float)))


def test_even_profiles():
    lap = even_profile({"kind": "laplace"})
    assert lap.r0 == 0.5
    gau = even_profile({"kind": "gaussian"})
    assert 0.5 <= gau.r0
    assert float(gau(gau.r0)) == pytest.approx(math.exp(-2 * gau.r0), abs=1e-9)
    tent = even_profile({"kind": "tent"})
    for prof in (lap, gau, tent):
        assert float(prof(0.5)) >= math.exp(-1) - 1e-12
        r = np.linspace(-0.5, 0.5, 101)
        assert np.all(prof(r) >= 1 - 2 * np.abs(r) - 1e-12)


def test_even_profile_normalization_is_enforced():
    with pytest.raises(SantaloError, match="int omega = 1"):
        even_profile(lambda r: np.maximum(1 - np.abs(r) / 2, 0.0))
    with pytest.raises(SantaloError, match="omega\\(0\\) = 1"):
        even_profile(lambda r: 2 * np.exp(-4 * np.abs(r)))
