import math

import numpy as np
import pytest

from santalo.borell import (
    borell_check,
    borell_fit,
    equality_triple,
    hypothesis_margin,
    log_trapezoid,
    perturbed_triple,
    profile_m,
)
from santalo.errors import SantaloError


def exp_m(t):
    return np.exp(-np.asarray(t, dtype=float))


def test_equal_functions_give_ratio_one():
    rep = borell_check(exp_m, exp_m, exp_m)
    assert rep.hypothesis_margin == pytest.approx(0.0, abs=1e-12)
    assert rep.ratio == pytest.approx(1.0, abs=1e-12)


def test_scaled_triples_are_equality_cases():
    g = np.random.default_rng(4)
    for _ in range(20):
        m = profile_m(g.uniform(0, 3), g.uniform(0.5, 2), g.uniform(0.5, 2))
        _, f, gg = equality_triple(m, math.exp(g.normal()), math.exp(g.normal()))
        rep = borell_check(m, f, gg)
        assert rep.hypothesis_margin >= -1e-9
        assert rep.ratio == pytest.approx(1.0, abs=1e-6)


def test_powered_triples_stay_below_one():
    g = np.random.default_rng(5)
    for _ in range(20):
        m = profile_m(g.uniform(0, 3), g.uniform(0.5, 2), g.uniform(0.5, 2))
        _, f, gg = equality_triple(m, 1.3, 0.7, g.uniform(0, 1), g.uniform(0, 1))
        rep = borell_check(m, f, gg)
        assert rep.hypothesis_margin >= -1e-9
        assert rep.ratio <= 1 + 1e-9


def test_mass_removal_is_strict():
    rep = borell_check(exp_m, lambda t: exp_m(t) * (np.asarray(t) <= 1), exp_m)
    assert rep.ratio < 1 - 1e-3


def test_violated_hypothesis_is_detected():
    assert hypothesis_margin(exp_m, lambda t: 2 * exp_m(t), exp_m) < 0


def test_fit_identity_and_inverse_scaling():
    m = profile_m(1.0, 1.0, 1.0)
    rep = borell_fit(m, m, m)
    assert rep.fit_a == pytest.approx(1.0, abs=1e-6) and rep.fit_b == pytest.approx(1.0, abs=1e-6)
    assert rep.l1_f < 1e-6
    rep = borell_fit(m, lambda t: 2 * m(3 * np.asarray(t)), lambda t: m(np.asarray(t) / 3) / 2)
    assert rep.fit_a == pytest.approx(0.5, abs=1e-3) and rep.fit_b == pytest.approx(1 / 3, abs=1e-3)
    assert rep.l1_f < 1e-6 and rep.l1_g < 1e-6


def test_perturbation_sweep_is_monotone():
    m = profile_m(1.0, 1.0, 1.0)
    l1 = []
    for delta in (0.2, 0.1, 0.05, 0.025):
        _, f, g = perturbed_triple(m, delta)
        l1.append(borell_fit(m, f, g).l1_f)
    assert all(a > b for a, b in zip(l1, l1[1:]))


def test_log_trapezoid_is_accurate():
    assert log_trapezoid(lambda t: t * np.exp(-t), 1e-12, 60.0) == pytest.approx(1.0, abs=1e-10)


def test_profile_validation():
    with pytest.raises(SantaloError):
        profile_m(-1.0)
    m = profile_m(2.0, 1.0, 1.0)
    assert float(m(2.0)) == pytest.approx(1.0)
