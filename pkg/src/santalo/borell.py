"""Borell's inequality on the half-line and the stability fit of its equality case.

For nonnegative ``M, F, G`` on ``[0, inf)`` with ``M(sqrt(rs))^2 >= F(r) G(s)``
one has ``int F * int G <= (int M)^2``. Equality is attained by
``F(r) = a M(b r)``, ``G(s) = M(s / b) / a``.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass

import numpy as np
from scipy.optimize import minimize

from .errors import NotIntegrableError, SantaloError
from .quad import QuadratureSpec, integrate_1d

MARGIN_TOL = 1e-9
GRID = 256
_QSPEC = QuadratureSpec(tol=1e-13, max_evals=400_000)


@dataclass
class BorellReport:
    hypothesis_margin: float
    ratio: float
    fit_a: float | None = None
    fit_b: float | None = None
    l1_f: float | None = None
    l1_g: float | None = None
    warning: str | None = None

    def to_dict(self):
        return asdict(self)


def _vec(fun):
    def wrapped(t):
        return np.asarray(fun(np.asarray(t, dtype=float)), dtype=float)

    return wrapped


def log_trapezoid(fun, lo, hi, nodes=4001):
    """``int_lo^hi fun(t) dt`` as a trapezoid rule in ``x = log t``.

    For integrands that are smooth in ``log t`` and decay at both ends the
    rule converges exponentially fast in the number of nodes.
    """
    x = np.linspace(math.log(lo), math.log(hi), nodes)
    t = np.exp(x)
    return float(np.trapezoid(fun(t) * t, x))


def _integral(fun, name, method="log-trapezoid"):
    if method == "adaptive":
        res = integrate_1d(fun, 0.0, np.inf, _QSPEC)
        val = float(res.value)
        if not math.isfinite(val) or res.warning:
            raise NotIntegrableError(f"not integrable: {name}")
    else:
        lo, hi = effective_support(fun)
        x = np.geomspace(lo, hi, 64)
        dens = fun(x) * x
        if not dens.max() > 0:
            raise SantaloError(f"{name} must have a positive integral")
        if dens[-1] > 1e-10 * dens.max() or hi >= 1e11:
            raise NotIntegrableError(f"not integrable: {name}")
        val = log_trapezoid(fun, lo, hi)
    if not val > 0:
        raise SantaloError(f"{name} must have a positive integral")
    return val


def effective_support(fun, rel=1e-14):
    """``(lo, hi)`` with ``fun`` below ``rel * peak`` beyond ``hi``.

    Probes a log-spaced range, so the result is meaningful for functions
    whose mass sits between ``1e-12`` and ``1e12``.
    """
    t = np.geomspace(1e-12, 1e12, 4801)
    v = fun(t)
    peak = float(np.max(v))
    if not peak > 0:
        raise SantaloError("function vanishes on the probe range")
    big = np.nonzero(v > rel * peak)[0]
    hi = t[min(big[-1] + 1, t.size - 1)]
    lo = t[big[0]]
    lo = min(lo, hi * 1e-8)
    return lo, hi


def hypothesis_margin(M, F, G, grid=GRID):
    """``min log M(sqrt(rs)) - (log F(r) + log G(s)) / 2`` on a log-spaced grid.

    Pairs where ``F(r) G(s) = 0`` are vacuous and skipped.
    """
    M, F, G = _vec(M), _vec(F), _vec(G)
    rlo, rhi = effective_support(F)
    slo, shi = effective_support(G)
    r = np.geomspace(rlo, rhi, grid)
    s = np.geomspace(slo, shi, grid)
    with np.errstate(divide="ignore"):
        lf = np.log(F(r))
        lg = np.log(G(s))
        lm = np.log(M(np.sqrt(np.outer(r, s))))
    rhs = 0.5 * (lf[:, None] + lg[None, :])
    live = np.isfinite(rhs)
    if not live.any():
        return math.inf
    return float(np.min(np.where(live, lm - rhs, np.inf)))


def borell_check(M, F, G, grid=GRID, tol=MARGIN_TOL, method="log-trapezoid") -> BorellReport:
    """Hypothesis margin and ``int F int G / (int M)^2``.

    Integrals use the log-substituted trapezoid rule by default, or adaptive
    Gauss-Kronrod with ``method="adaptive"``. When the margin is at least
    ``-tol`` the ratio is asserted to be at most ``1 + tol``.
    """
    M, F, G = _vec(M), _vec(F), _vec(G)
    margin = hypothesis_margin(M, F, G, grid)
    im, i_f, ig = (_integral(h, name, method) for h, name in ((M, "M"), (F, "F"), (G, "G")))
    ratio = i_f * ig / im**2
    if margin >= -tol and ratio > 1.0 + tol:
        raise SantaloError(f"ratio {ratio} exceeds 1 although the hypothesis holds")
    return BorellReport(margin, ratio)


def _l1(fun_a, fun_b, window, norm, nodes=4001):
    def diff(t):
        return np.abs(fun_a(t) - fun_b(t))

    return log_trapezoid(diff, window[0], window[1], nodes) / norm


def _first_moment(fun):
    return _integral(lambda t: t * fun(t), "t * f")


def borell_fit(M, F, G, grid=GRID, xatol=1e-10, restarts=2) -> BorellReport:
    """Fit ``a, b > 0`` minimizing ``int |a F(b t) - M(t)| dt``.

    Nelder-Mead on ``(log a, log b)`` initialized by matching mass and mean.
    ``l1_g`` is the analogous error of ``G(t / b) / a`` against ``M``; both are
    normalized by ``int M``.
    """
    M, F, G = _vec(M), _vec(F), _vec(G)
    rep = borell_check(M, F, G, grid)
    im, i_f = _integral(M, "M"), _integral(F, "F")
    b0 = (_first_moment(F) / i_f) / (_first_moment(M) / im)
    a0 = b0 * im / i_f
    m_lo, m_hi = effective_support(M)
    f_lo, f_hi = effective_support(F)
    g_lo, g_hi = effective_support(G)

    def window_f(b):
        return min(m_lo, f_lo / b), max(m_hi, f_hi / b)

    def objective(p):
        a, b = math.exp(p[0]), math.exp(p[1])
        return _l1(lambda t: a * F(b * t), M, window_f(b), im)

    x = np.array([math.log(a0), math.log(b0)])
    res = None
    for _ in range(restarts):
        res = minimize(
            objective,
            x,
            method="Nelder-Mead",
            options={
                "xatol": xatol,
                "fatol": 1e-15,
                "maxiter": 4000,
                "initial_simplex": x + np.array([[0, 0], [0.05, 0], [0, 0.05]]),
            },
        )
        x = res.x
    a, b = math.exp(x[0]), math.exp(x[1])
    rep.fit_a, rep.fit_b = a, b
    rep.l1_f = _l1(lambda t: a * F(b * t), M, window_f(b), im, 16001)
    rep.l1_g = _l1(lambda t: G(t / b) / a, M, (min(m_lo, g_lo * b), max(m_hi, g_hi * b)), im, 16001)
    if not res.success:
        rep.warning = "optimizer stagnation: " + str(res.message)
    return rep


# ---------------------------------------------------------------------
# instance families
# ---------------------------------------------------------------------


def profile_m(k=1.0, c=1.0, p=1.0):
    """``M(t) = t^k exp(-c t^p)`` scaled to peak 1; ``t -> M(e^t)`` is log-concave."""
    if not (k >= 0 and c > 0 and p > 0):
        raise SantaloError("need k >= 0, c > 0, p > 0")
    tpk = (k / (c * p)) ** (1.0 / p) if k > 0 else 0.0
    peak = tpk**k * math.exp(-c * tpk**p) if k > 0 else 1.0

    def m(t):
        t = np.asarray(t, dtype=float)
        with np.errstate(divide="ignore", invalid="ignore"):
            return np.where(t >= 0, np.power(t, k) * np.exp(-c * np.power(t, p)) / peak, 0.0)

    return m


def equality_triple(m, a, b, u=0.0, v=0.0):
    """``F = a M(b .)^(1+u)``, ``G = M(. / b)^(1+v) / a``; valid since ``M <= 1``."""

    def f(t):
        return a * np.power(m(b * np.asarray(t, dtype=float)), 1.0 + u)

    def g(t):
        return np.power(m(np.asarray(t, dtype=float) / b), 1.0 + v) / a

    return m, f, g


def perturbed_triple(m, delta):
    """``F = M (1 - delta (1 + sin t) / 2)``, ``G = M``: mass removal keeps the hypothesis."""

    def f(t):
        t = np.asarray(t, dtype=float)
        return m(t) * (1.0 - 0.5 * delta * (1.0 + np.sin(t)))

    return m, f, m
