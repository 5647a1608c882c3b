"""Log-concave non-increasing weights and even log-concave profiles.

A weight ``rho`` on ``[0, inf)`` is stored through ``alpha = -log rho`` and
normalized to ``rho(0) = 1 = int_0^inf rho`` by the rescaling
``rho(t) -> nu * rho(lam2 * t)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy.special import gamma

from .errors import (
    NotIntegrableError,
    NotLogConcaveError,
    NotNonIncreasingError,
    SantaloError,
)
from .quad import QuadratureSpec, integrate_1d

CONVEXITY_TOL = 1e-9
MONOTONE_TOL = 1e-12
_ALPHA_CAP = 745.0  # exp(-745) underflows to 0


# ---------------------------------------------------------------------
# raw (un-normalized) weight families
# ---------------------------------------------------------------------


@dataclass(frozen=True)
class _Raw:
    kind: str
    params: dict
    alpha: Callable  # vectorized on t >= 0, +inf past the support
    support_end: float = math.inf
    slope0: float | None = None  # exact right derivative of alpha at 0
    integral: float | None = None  # exact int_0^inf exp(-alpha), if known
    neg: Callable | None = None  # closed-form continuation to t < 0


def _raw_from_spec(spec) -> _Raw:
    if callable(spec):
        return _raw_callable(spec)
    kind = spec.get("kind")
    if kind == "exp":
        a = float(spec.get("rate", 1.0))
        if a <= 0:
            raise NotIntegrableError("not integrable: exp rate must be > 0")
        return _Raw("exp", {"rate": a}, lambda t: a * np.asarray(t, float), math.inf, a, 1.0 / a,
                    lambda t: a * np.asarray(t, float))
    if kind in ("linear", "linear-cutoff"):
        s = float(spec.get("slope", 0.5))
        if s <= 0:
            raise NotIntegrableError("not integrable: linear slope must be > 0")

        def alpha(t):
            t = np.asarray(t, dtype=float)
            with np.errstate(divide="ignore", invalid="ignore"):
                return np.where(t < 1.0 / s, -np.log1p(-s * np.minimum(t, 1.0 / s)), np.inf)

        def neg(t):
            return -np.log1p(-s * np.asarray(t, float))

        return _Raw("linear", {"slope": s}, alpha, 1.0 / s, s, 0.5 / s, neg)
    if kind in ("power", "gaussian-power"):
        b = float(spec.get("b", 1.0))
        p = float(spec.get("p", 2.0))
        if b < 0 or p < 1:
            raise NotLogConcaveError("not log-concave: need b >= 0 and p >= 1")

        def alpha(t):
            t = np.asarray(t, dtype=float)
            return t + b * np.abs(t) ** p

        return _Raw("gaussian-power", {"b": b, "p": p}, alpha, math.inf, 1.0 if p > 1 else 1.0 + b)
    if kind == "sampled":
        return _raw_sampled(spec["t"], spec["rho"])
    raise SantaloError(f"unknown weight kind {kind!r}")


def _raw_sampled(t, rho) -> _Raw:
    t = np.asarray(t, dtype=float)
    rho = np.asarray(rho, dtype=float)
    if t.ndim != 1 or t.shape != rho.shape or t.size < 2:
        raise SantaloError("sampled weight needs matching 1D t and rho arrays (>= 2 points)")
    if np.any(np.diff(t) <= 0):
        raise SantaloError("sampled weight t must be strictly increasing")
    if t[0] != 0.0:
        raise SantaloError("sampled weight must start at t = 0")
    if np.any(rho < 0) or rho[0] <= 0:
        raise SantaloError("sampled weight must be nonnegative with rho(0) > 0")
    zero = np.nonzero(rho == 0)[0]
    end = math.inf
    if zero.size:
        k = zero[0]
        end = float(t[k])
        t, rho = t[:k], rho[:k]
    a = -np.log(rho)
    if t.size == 1:
        raise SantaloError("sampled weight needs two positive samples")
    slopes = np.diff(a) / np.diff(t)
    s_last = float(slopes[-1])

    def alpha(x):
        x = np.asarray(x, dtype=float)
        inner = np.interp(x, t, a)
        out = np.where(x > t[-1], a[-1] + s_last * (x - t[-1]), inner)
        return np.where(x >= end, np.inf, out)

    # exact integral of exp(-piecewise linear)
    total = 0.0
    for i in range(t.size - 1):
        d, m = t[i + 1] - t[i], slopes[i]
        total += math.exp(-a[i]) * (d if m == 0 else -math.expm1(-m * d) / m)
    if math.isfinite(end):
        d = end - t[-1]
        total += math.exp(-a[-1]) * (d if s_last == 0 else -math.expm1(-s_last * d) / s_last)
    elif s_last <= 0:
        raise NotIntegrableError("not integrable: sampled weight does not decay")
    else:
        total += math.exp(-a[-1]) / s_last
    return _Raw("sampled", {"t": t.tolist(), "rho": rho.tolist()}, alpha, end,
                float(slopes[0]), total)


def _raw_callable(fn) -> _Raw:
    def alpha(t):
        t = np.asarray(t, dtype=float)
        with np.errstate(divide="ignore"):
            return -np.log(np.asarray(fn(t), dtype=float))

    # locate the support end, if any, by doubling then bisection
    hi = 1.0
    end = math.inf
    while hi < 1e8:
        if not np.isfinite(alpha(hi)):
            lo_b, hi_b = 0.0, hi
            for _ in range(200):
                mid = 0.5 * (lo_b + hi_b)
                if np.isfinite(alpha(mid)):
                    lo_b = mid
                else:
                    hi_b = mid
            # a zero reached only after deep decay is underflow, not support
            end = hi_b if float(alpha(lo_b)) < 600.0 else math.inf
            break
        if alpha(hi) > _ALPHA_CAP:
            break
        hi *= 2.0
    return _Raw("callable", {}, alpha, end)


# ---------------------------------------------------------------------
# sampling checks
# ---------------------------------------------------------------------


def _sample_points(alpha, end):
    """Adaptive sample set on the effective support, dense near its ends."""
    if math.isfinite(end):
        rel = np.concatenate([np.linspace(0.0, 1.0, 801)[:-1], 1.0 - np.geomspace(1e-3, 1e-9, 60)])
        return np.unique(rel * end)
    hi = 1.0
    while float(alpha(hi)) < 60.0 and hi < 1e12:
        hi *= 2.0
    return np.unique(np.concatenate([np.linspace(0.0, hi, 801), np.geomspace(hi * 1e-6, hi * 1e-3, 40)]))


def _check_shape(alpha, end):
    t = _sample_points(alpha, end)
    a = np.asarray(alpha(t), dtype=float)
    if not math.isfinite(end) and not np.nanmax(a) >= 60.0:
        raise NotIntegrableError("not integrable: weight does not decay")
    ok = a < 600.0  # skip the subnormal range of exp(-alpha)
    t, a = t[ok], a[ok]
    da = np.diff(a)
    if np.any(da < -MONOTONE_TOL * (1.0 + np.abs(a[:-1]))):
        raise NotNonIncreasingError("not non-increasing")
    dt = np.diff(t)
    s = da / dt
    ds = np.diff(s)
    # rounding in alpha turns into slope noise of order eps |alpha| / dt
    noise = 8 * np.finfo(float).eps * (1.0 + np.abs(a[1:])) / dt
    slack = CONVEXITY_TOL * (1.0 + np.abs(s[:-1])) + noise[:-1] + noise[1:]
    if np.any(ds < -slack):
        raise NotLogConcaveError("not log-concave")
    return bool(np.all(da > 0))


def _right_derivative(alpha, h=1e-6):
    d1 = (float(alpha(h)) - float(alpha(0.0))) / h
    d2 = (float(alpha(2 * h)) - float(alpha(0.0))) / (2 * h)
    return 2.0 * d1 - d2


def crossing_point(alpha, rate=1.0, end=math.inf, degenerate=1.0, tol=1e-10):
    """Positive root of ``alpha(t) - rate * t`` for convex ``alpha``, ``alpha(0)=0``.

    Below the root ``exp(-alpha) >= exp(-rate t)``, above it the reverse. When
    ``alpha`` coincides with ``rate * t`` the crossing is not unique and
    ``degenerate`` is returned.
    """
    def d(t):
        return float(alpha(t)) - rate * t

    top = end if math.isfinite(end) else 1.0
    if not math.isfinite(end):
        while d(top) <= 0 and float(alpha(top)) < 600.0 and top < 1e12:
            top *= 2.0
    grid = np.linspace(0.0, top, 4001)[1:]
    av = np.asarray(alpha(grid), dtype=float)
    vals = av - rate * grid
    neg = (vals < -1e-12 * (1.0 + rate * grid)) & (av < 600.0)
    if not neg.any():
        return degenerate
    k = int(np.nonzero(neg)[0][-1])
    lo = grid[k]
    hi = grid[k + 1] if k + 1 < grid.size else top
    if math.isfinite(end) and hi >= end:
        hi = end
    while hi - lo > tol * max(1.0, hi):
        mid = 0.5 * (lo + hi)
        if d(mid) < 0:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


# ---------------------------------------------------------------------
# normalized weight
# ---------------------------------------------------------------------


@dataclass(frozen=True)
class NormalizedWeight:
    """Normalized weight with ``rho(0) = 1 = int_0^inf rho``.

    ``rho(t) = nu * rho_raw(lam2 * t)``. For ``t < 0`` the closed-form
    continuation is used when the family has one (``exp``, ``linear``),
    otherwise ``alpha`` is continued linearly with slope ``alpha'(0)``.
    """

    kind: str
    params: dict
    nu: float
    lam2: float
    support_end: float
    alpha_prime_0: float
    t0: float
    moments: tuple
    strictly_decreasing: bool
    raw: _Raw = field(repr=False, compare=False)

    def alpha(self, t):
        t = np.asarray(t, dtype=float)
        pos = self.raw.alpha(self.lam2 * np.maximum(t, 0.0)) - math.log(self.nu)
        if np.all(t >= 0):
            return pos
        if self.raw.neg is not None:
            negv = self.raw.neg(self.lam2 * np.minimum(t, 0.0)) - math.log(self.nu)
        else:
            negv = self.alpha_prime_0 * t
        return np.where(t >= 0, pos, negv)

    def rho(self, t):
        with np.errstate(over="ignore"):
            return np.exp(-self.alpha(t))

    __call__ = rho

    def moment(self, n):
        return self.moments[n - 1]

    def to_dict(self):
        return {
            "kind": self.kind,
            "params": self.params,
            "nu": self.nu,
            "lam2": self.lam2,
            "support_end": None if math.isinf(self.support_end) else self.support_end,
            "alpha_prime_0": self.alpha_prime_0,
            "t0": self.t0,
            "moments": list(self.moments),
            "strictly_decreasing": self.strictly_decreasing,
        }


def validate_weight(spec) -> NormalizedWeight:
    """Check and normalize a weight given as JSON-like dict, callable, or weight.

    Raises ``NotLogConcaveError``, ``NotNonIncreasingError`` or
    ``NotIntegrableError`` when the input is inadmissible.
    """
    if isinstance(spec, NormalizedWeight):
        raw = spec.raw
        nu0, lam0 = spec.nu, spec.lam2
    else:
        raw = _raw_from_spec(spec)
        nu0, lam0 = 1.0, 1.0

    def alpha0(t):
        return raw.alpha(lam0 * np.asarray(t, float)) - math.log(nu0)

    end0 = raw.support_end / lam0
    strict = _check_shape(alpha0, end0)

    a_at_0 = float(alpha0(0.0))
    if not math.isfinite(a_at_0):
        raise SantaloError("weight must be positive at 0")
    rho0 = math.exp(-a_at_0)
    if raw.integral is not None:
        integral = raw.integral * nu0 / lam0
    else:
        res = integrate_1d(
            lambda t: np.exp(-alpha0(t)),
            0.0,
            end0,
            QuadratureSpec(tol=1e-13),
        )
        integral = float(res.value)
        if not math.isfinite(integral) or res.warning:
            raise NotIntegrableError("not integrable")
    if not integral > 0 or not math.isfinite(integral):
        raise NotIntegrableError("not integrable")

    nu = 1.0 / rho0
    lam2 = integral / rho0
    # snap near-identity rescalings so normalization is idempotent
    if abs(nu - 1.0) < 1e-12:
        nu = 1.0
    if abs(lam2 - 1.0) < 1e-12:
        lam2 = 1.0
    nu_tot, lam_tot = nu0 * nu, lam0 * lam2

    def alpha(t):
        return raw.alpha(lam_tot * np.asarray(t, float)) - math.log(nu_tot)

    end = raw.support_end / lam_tot
    if raw.slope0 is not None:
        ap0 = raw.slope0 * lam_tot
    else:
        ap0 = _right_derivative(alpha)
    if not ap0 > 0:
        raise NotNonIncreasingError("weight is flat at 0: alpha'(0) must be > 0")
    if ap0 > 1.0 + 1e-6:
        raise SantaloError(f"normalized alpha'(0) = {ap0} exceeds 1")
    ap0 = min(ap0, 1.0)
    t0 = crossing_point(alpha, 1.0, end, degenerate=1.0)
    moments = tuple(_moment(alpha, end, n) for n in range(1, 5))
    return NormalizedWeight(raw.kind, raw.params, nu_tot, lam_tot, end, ap0, t0, moments, strict, raw)


def _moment(alpha, end, n):
    rmax = math.sqrt(end) if math.isfinite(end) else math.inf

    def integrand(r):
        with np.errstate(over="ignore"):
            return r ** (n - 1) * np.exp(-alpha(r * r))

    res = integrate_1d(integrand, 0.0, rmax, QuadratureSpec(tol=1e-13))
    return float(res.value)


def weight_moment(w: NormalizedWeight, n: int) -> float:
    """``int_0^inf r^(n-1) rho(r^2) dr``.

    For ``n >= 2`` this is at most ``Gamma(n/2)/2`` (with equality at
    ``n = 2``), which is asserted. For ``n = 1`` no such bound holds: the
    linear cutoff weight gives ``2 sqrt(2)/3 > sqrt(pi)/2``.
    """
    if not 1 <= n <= 4:
        raise SantaloError("moment order n must be in 1..4")
    m = w.moments[n - 1]
    bound = gamma(n / 2) / 2
    if n >= 2 and m > bound + 1e-9:
        raise SantaloError(f"moment {m} exceeds Gamma(n/2)/2 = {bound}")
    return m


def reference_integral(w: NormalizedWeight, n: int, half_square: bool) -> float:
    """``int_{R^n} rho(|x|^2 / 2) dx`` (half-square) or ``rho(|x|^2)``."""
    from .sphere import sphere_area

    base = sphere_area(n) * w.moments[n - 1]
    return base * 2 ** (n / 2) if half_square else base


# ---------------------------------------------------------------------
# extension to the whole line
# ---------------------------------------------------------------------


@dataclass(frozen=True)
class ExtendedWeight:
    """``alpha_*``: ``alpha`` on ``t >= 0`` and ``alpha'(0) t`` on ``t <= 0``."""

    base: NormalizedWeight

    @property
    def slope0(self):
        return self.base.alpha_prime_0

    def alpha_star(self, t):
        t = np.asarray(t, dtype=float)
        return np.where(t >= 0, self.base.alpha(np.maximum(t, 0.0)), self.slope0 * np.minimum(t, 0.0))

    def rho_star(self, t):
        with np.errstate(over="ignore"):
            return np.exp(-self.alpha_star(t))

    __call__ = rho_star


def alpha_star_extend(w: NormalizedWeight) -> ExtendedWeight:
    return ExtendedWeight(w)


# ---------------------------------------------------------------------
# even profiles
# ---------------------------------------------------------------------


@dataclass(frozen=True)
class EvenProfile:
    omega: Callable = field(repr=False)
    r0: float
    kind: str = "callable"

    def __call__(self, r):
        return self.omega(r)


_PROFILES = {
    "laplace": lambda r: np.exp(-2.0 * np.abs(r)),
    "gaussian": lambda r: np.exp(-np.pi * np.asarray(r, float) ** 2),
    "tent": lambda r: np.maximum(1.0 - np.abs(r), 0.0),
}


def even_profile(spec, tol=1e-9) -> EvenProfile:
    """Validate an even log-concave profile with ``omega(0) = 1 = int omega``.

    Computes the crossing ``r0`` against ``exp(-2|r|)`` (``1/2`` in the
    degenerate case ``omega = exp(-2|r|)``) and asserts ``omega(1/2) >= 1/e``
    and ``omega(r) >= 1 - 2|r|`` on ``|r| <= 1/2``.
    """
    if callable(spec):
        omega, kind = spec, "callable"
    else:
        kind = spec["kind"]
        if kind not in _PROFILES:
            raise SantaloError(f"unknown profile kind {kind!r}")
        omega = _PROFILES[kind]

    def om(r):
        return np.asarray(omega(np.asarray(r, dtype=float)), dtype=float)

    if abs(float(om(0.0)) - 1.0) > tol:
        raise SantaloError("profile must satisfy omega(0) = 1")
    raw = _raw_callable(om)
    half = integrate_1d(om, 0.0, raw.support_end, QuadratureSpec(tol=1e-13))
    if abs(2.0 * float(half.value) - 1.0) > 1e-8:
        raise SantaloError("profile must satisfy int omega = 1")
    r = np.linspace(0.0, 5.0, 501)
    if np.max(np.abs(om(r) - om(-r))) > tol:
        raise SantaloError("profile is not even")
    strict = _check_shape(raw.alpha, raw.support_end)
    del strict
    r0 = crossing_point(raw.alpha, 2.0, raw.support_end, degenerate=0.5)
    if float(om(0.5)) < math.exp(-1.0) - 1e-12:
        raise SantaloError("omega(1/2) >= 1/e fails")
    rr = np.linspace(0.0, 0.5, 201)
    if np.any(om(rr) < 1.0 - 2.0 * rr - 1e-12):
        raise SantaloError("omega(r) >= 1 - 2|r| fails on |r| <= 1/2")
    return EvenProfile(om, r0, kind)
