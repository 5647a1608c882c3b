import math

import numpy as np
import pytest

from santalo.errors import HypothesisViolatedError, OutOfRangeError, SantaloError
from santalo.functional import SantaloReport, compose
from santalo.io import parse_profile
from santalo.stability import (
    ScanCurve,
    ball_rule,
    best_center_deficit,
    center_search,
    deficit,
    family_field,
    logconcave_center_check,
    psi_measure,
    radius_R,
    stability_fit_functional,
    stability_fit_legendre,
    stability_scan,
    truncation_deficit,
)
from santalo.transform import GridField, legendre
from santalo.weights import validate_weight

EXP = validate_weight({"kind": "exp"})


def half_sq(x):
    return 0.5 * np.sum(x * x, axis=-1)


def potential(fun, half=6.0, m=97, n=2):
    return GridField.from_function(fun, -half * np.ones(n), half * np.ones(n), m, "known-convex")


def test_radius_examples():
    assert radius_R(EXP, 1e-8, 2) ** 2 == pytest.approx(-math.log(1e-8) / 256, rel=1e-10)
    assert radius_R(EXP, math.exp(-64), 1) == pytest.approx(1.0, rel=1e-10)
    r = [radius_R(EXP, e, 3) for e in (1e-2, 1e-4, 1e-8, 1e-16)]
    assert all(a < b for a, b in zip(r, r[1:]))


def test_radius_errors():
    with pytest.raises(OutOfRangeError, match="R out of range"):
        radius_R(EXP, 0.0, 2)
    with pytest.raises(OutOfRangeError):
        radius_R(EXP, 1.0, 2)
    with pytest.raises(SantaloError, match="flat at 0"):
        radius_R({"kind": "sampled", "t": [0, 1, 2, 3], "rho": [1, 1, math.exp(-1), math.exp(-2)]}, 0.1, 2)


def test_deficit_clamp():
    rep = SantaloReport.build("half-square", [0.0], 1.0, 1.0000001, 1.0)
    assert rep.deficit_minus < 0
    assert deficit(rep) == 0.0


def test_truncation_deficit_against_quadrature():
    for cut in (2.0, 3.0):
        phi = GridField.from_function(
            lambda x, c=cut: np.where(np.sum(x * x, axis=-1) <= c * c, half_sq(x), np.inf),
            [-8.0, -8.0], [8.0, 8.0], 257,
        )
        res = best_center_deficit(EXP, phi, dual=([-8.0, -8.0], [8.0, 8.0]), z0=np.zeros(2), refine=True)
        assert res.eps == pytest.approx(truncation_deficit(cut), rel=0.05)
    assert truncation_deficit(5.0) < truncation_deficit(4.0)


def test_gaussian_deficit_is_near_zero():
    res = best_center_deficit(EXP, potential(half_sq, 8.0, 129), dual=([-8.0, -8.0], [8.0, 8.0]))
    assert res.eps < 1e-6


def test_ball_rule_volume():
    rule = ball_rule(2, 1.5)
    assert rule.weights.sum() == pytest.approx(math.pi * 1.5**2, rel=2e-3)
    assert np.all(np.linalg.norm(rule.points, axis=1) <= 1.5)


def test_legendre_fit_of_quadratics():
    fit = stability_fit_legendre(EXP, potential(half_sq), eps=1e-8)
    assert np.allclose(fit.z, 0, atol=1e-4) and abs(fit.c) < 1e-4
    assert np.allclose(fit.T, np.eye(2), atol=1e-3)
    assert fit.l1_primal < 1e-4
    A = np.array([[2.0, 0.5], [0.5, 1.0]])
    fit = stability_fit_legendre(EXP, potential(lambda x: 0.5 * np.einsum("...i,ij,...j", x, A, x)), eps=1e-8)
    w, v = np.linalg.eigh(A)
    root = v @ np.diag(np.sqrt(w)) @ v.T
    assert np.linalg.norm(fit.T - root, 2) < 1e-3


def test_legendre_fit_shift_gauge():
    v = np.array([0.4, -0.3])
    a = stability_fit_legendre(EXP, potential(lambda x: half_sq(x) + 0.2 * np.abs(x[..., 0])), eps=1e-3)
    b = stability_fit_legendre(EXP, potential(lambda x: half_sq(x - v) + 0.2 * np.abs(x[..., 0] - v[0])), eps=1e-3)
    assert np.allclose(b.z - a.z, v, atol=5e-3)
    assert b.l1_primal == pytest.approx(a.l1_primal, rel=0.05)


def gaussian_pair(T, xi=1.0, half=6.0, m=97):
    Ti = np.linalg.inv(T)
    f = GridField.from_function(lambda x: xi * np.exp(-np.sum((x @ T.T) ** 2, -1)), -half * np.ones(2), half * np.ones(2), m, outside=0.0)
    g = GridField.from_function(lambda x: np.exp(-np.sum((x @ Ti.T) ** 2, -1)) / xi, -half * np.ones(2), half * np.ones(2), m, outside=0.0)
    return f, g


def test_functional_fit_recovers_equality_pairs():
    fit = stability_fit_functional(EXP, *gaussian_pair(np.eye(2)), z=np.zeros(2))
    assert fit.xi == pytest.approx(1.0, abs=1e-3)
    assert np.allclose(fit.T, np.eye(2), atol=1e-3)
    T0 = np.diag([2.0, 0.5])
    fit = stability_fit_functional(EXP, *gaussian_pair(T0), z=np.zeros(2))
    assert np.linalg.norm(fit.T - T0, 2) < 1e-3 and fit.xi == pytest.approx(1.0, abs=1e-3)
    assert max(fit.l1_primal, fit.l1_dual) < 1e-4


def test_functional_fit_xi_gauge():
    T0 = np.diag([1.5, 0.8])
    a = stability_fit_functional(EXP, *gaussian_pair(T0), z=np.zeros(2))
    b = stability_fit_functional(EXP, *gaussian_pair(T0, xi=3.0), z=np.zeros(2))
    assert b.xi / a.xi == pytest.approx(3.0, rel=1e-3)
    assert b.l1_primal == pytest.approx(a.l1_primal, abs=1e-5)


def test_psi_measure_examples():
    convex = potential(half_sq, m=61)
    out = psi_measure(convex, EXP, 1e-4, R_list=(1.0, 3.0))
    assert all(v == 0 for _, v in out["table"])

    c, r0 = np.array([2.0, 0.0]), 0.6
    spiky = GridField.from_function(
        lambda x: np.where(np.sum((x - c) ** 2, -1) <= r0 * r0, np.inf, half_sq(x)), [-6.0, -6.0], [6.0, 6.0], 241
    )
    out = psi_measure(spiky, EXP, 1e-4, R_list=(1.0, 2.0, 3.0, 4.0))
    vols = [v for _, v in out["table"]]
    assert vols[0] == 0.0
    assert all(a <= b for a, b in zip(vols, vols[1:]))
    assert vols[-1] == pytest.approx(math.pi * r0**2, rel=0.1)

    thr = 1e-4 ** (1 / 512)
    bumped = GridField.from_function(
        lambda x: half_sq(x) + 0.5 * thr * np.all(np.abs(x - 1) <= 0.5, axis=-1), [-6.0, -6.0], [6.0, 6.0], 61
    )
    out = psi_measure(bumped, EXP, 1e-4, R_list=(5.0,))
    assert out["table"][0][1] == 0.0


def test_psi_measure_is_monotone_in_threshold():
    spiky = GridField.from_function(
        lambda x: half_sq(x) + 2.0 * (np.abs(x[..., 0] - 1) < 0.3), [-4.0, -4.0], [4.0, 4.0], 81
    )
    vols = [psi_measure(spiky, EXP, e, R_list=(3.0,))["table"][0][1] for e in (1e-200, 1e-50, 1e-4)]
    assert vols[0] <= vols[1] <= vols[2]


def test_psi_bound_report():
    out = psi_measure(potential(half_sq, m=41), EXP, 1e-4, R_list=(1.0,), eta=1.0)
    assert out["bound"][0]["holds"]


def test_center_check_examples():
    omega = parse_profile({"kind": "laplace"})
    rep = logconcave_center_check(omega, omega, 2, 1e-6)
    assert rep.lhs == 0.0 and rep.passed
    for delta in (1e-3, 1e-4, 1e-5):
        def h(r, d=delta):
            return omega(r) * np.exp(d * (1 - np.abs(r)))

        rep = logconcave_center_check(h, omega, 1, 10 * delta)
        assert rep.passed and 0 < rep.eps_measured <= 10 * delta
        shifted = logconcave_center_check(lambda r, d=delta: omega(r - d), omega, 2, 10 * delta)
        assert shifted.passed


def test_center_check_rejects_violated_hypothesis():
    omega = parse_profile({"kind": "laplace"})
    with pytest.raises(HypothesisViolatedError, match="hypothesis violated"):
        logconcave_center_check(lambda r: omega(r) * 1.1, omega, 1, 1e-3)


def test_center_search_small_corpus_is_deterministic():
    a = center_search(300, seed=11)
    b = center_search(300, seed=11)
    assert a == b
    assert a["pairs"] == 300 and a["violations"] == 0


def test_fenchel_young_on_the_diagonal():
    for fam, d in (("bump", 0.3), ("quadratic", 0.2)):
        phi = family_field(fam, d, 2, 6.0, 97)
        psi = legendre(phi, np.zeros(2), dual=(phi.lo, phi.hi))
        x = phi.points()
        F = phi.values + psi.values - np.sum(x * x, axis=-1)
        assert np.min(F[np.isfinite(F)]) >= -1e-9


def test_family_field_errors():
    with pytest.raises(OutOfRangeError):
        family_field("truncated-quadratic", 1.5)
    with pytest.raises(OutOfRangeError):
        family_field("quadratic", 5.0)


def test_quadratic_scan_is_degenerate():
    curve = stability_scan("quadratic", n=1, steps=3, grid=513)
    assert curve.degenerate
    assert all(p.distance < 1e-3 for p in curve.points)


@pytest.mark.slow
def test_truncation_scan_csv():
    curve = stability_scan("truncated-quadratic", n=1, steps=4, grid=1025)
    assert curve.monotone_eps
    rows = curve.to_csv().strip().splitlines()
    assert rows[0].split(",") == list(ScanCurve.CSV_COLUMNS)
    assert len(rows) == 5
    eps = [p.eps for p in curve.points]
    assert eps == sorted(eps)
