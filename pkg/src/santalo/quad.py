"""Shared quadrature engine.

Adaptive 1D integrals (Gauss-Kronrod 7/15 with bisection), radial/spherical
integrals over R^n, trapezoidal tensor-grid integrals and a reproducible
Monte Carlo estimator used as an independent cross-check.
"""

from __future__ import annotations

import warnings
from dataclasses import asdict, dataclass

import numpy as np
from scipy.integrate import quad_vec

from .sphere import sphere_grid

METHODS = ("adaptive-1d", "radial-spherical", "tensor-grid", "monte-carlo")


@dataclass(frozen=True)
class QuadratureSpec:
    method: str = "adaptive-1d"
    tol: float = 1e-10
    max_evals: int = 200_000
    seed: int = 0

    def __post_init__(self):
        if self.method not in METHODS:
            raise ValueError(f"unknown quadrature method {self.method!r}")
        if not self.tol > 0:
            raise ValueError("tol must be > 0")
        if self.max_evals < 100:
            raise ValueError("max_evals must be >= 100")

    def to_dict(self):
        return asdict(self)


@dataclass
class QuadResult:
    value: float
    error: float
    evals: int
    warning: str | None = None

    def __float__(self):
        return float(self.value)


def integrate_1d(f, a, b, spec: QuadratureSpec | None = None, points=None):
    """Adaptive GK15 integral of a vectorizable ``f`` on ``[a, b]``.

    ``f`` may return an array (the integral is then taken componentwise, with
    the error controlled in the max norm). Infinite endpoints are allowed.
    ``points`` are known breakpoints used to seed the subdivision.
    """
    spec = spec or QuadratureSpec()
    limit = max(spec.max_evals // 15, 10)
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        value, err, info = quad_vec(
            f,
            a,
            b,
            epsabs=spec.tol,
            epsrel=spec.tol,
            limit=limit,
            quadrature="gk15",
            points=points,
            full_output=True,
        )
    msg = None
    # status 2 means the rounding floor was reached, which is acceptable
    if info.status == 1:
        msg = "budget exhausted before tolerance was met"
    elif not np.all(np.isfinite(value)):
        msg = "non-finite integral"
    elif caught and info.status != 2:
        msg = str(caught[0].message)
    return QuadResult(value, float(err), int(info.neval), msg)


def integrate_radial(f, n: int, spec: QuadratureSpec | None = None, grid_size=None, rmax=np.inf):
    """Integral of ``f`` over R^n in polar coordinates.

    ``f`` receives an array of points with trailing axis ``n`` and returns
    values of the leading shape. The radial integral for every sphere-grid
    direction is computed jointly by vector-valued adaptive quadrature.
    """
    spec = spec or QuadratureSpec(method="radial-spherical")
    u, w = sphere_grid(n, grid_size)

    def ray(r):
        return r ** (n - 1) * f(r * u)

    res = integrate_1d(ray, 0.0, rmax, spec)
    value = float(np.dot(w, res.value))
    return QuadResult(value, float(np.sum(w) * res.error), res.evals * len(u), res.warning)


def integrate_grid(field, weight=None):
    """Trapezoidal tensor integral of ``weight(values)`` over the field box.

    ``weight`` maps extended reals to finite values; with ``weight=None`` the
    raw values are integrated. The trapezoid rule integrates the multilinear
    interpolant of the samples exactly.
    """
    vals = field.values if weight is None else weight(field.values)
    vals = np.asarray(vals, dtype=float)
    for ax in reversed(range(field.dim)):
        vals = np.trapezoid(vals, field.axes[ax], axis=ax)
    return float(vals)


def _philox(seed, batch):
    bg = np.random.Philox(key=int(seed) & (2**64 - 1))
    if batch:
        bg = bg.jumped(batch)
    return np.random.Generator(bg)


def integrate_mc(f, domain, spec: QuadratureSpec | None = None, samples=None, batch_size=65536):
    """Uniform-sampling Monte Carlo estimate of the integral of ``f``.

    ``domain`` is ``("box", lo, hi)`` or ``("ball", center, radius)``.
    Batch ``i`` draws from a Philox stream advanced by ``i`` jumps, so the
    estimate does not depend on how batches are scheduled.
    Returns ``(estimate, stderr)``.
    """
    spec = spec or QuadratureSpec(method="monte-carlo", max_evals=1_000_000)
    total = int(samples or spec.max_evals)
    kind = domain[0]
    if kind == "box":
        lo = np.asarray(domain[1], dtype=float)
        hi = np.asarray(domain[2], dtype=float)
        n = lo.size
        vol = float(np.prod(hi - lo))
    elif kind == "ball":
        c = np.asarray(domain[1], dtype=float)
        rad = float(domain[2])
        n = c.size
        from .sphere import ball_volume

        vol = ball_volume(n) * rad**n
    else:
        raise ValueError(f"unknown domain {kind!r}")

    s1 = 0.0
    s2 = 0.0
    done = 0
    batch = 0
    while done < total:
        m = min(batch_size, total - done)
        rng = _philox(spec.seed, batch)
        if kind == "box":
            x = lo + (hi - lo) * rng.random((m, n))
        else:
            g = rng.standard_normal((m, n))
            g /= np.linalg.norm(g, axis=1, keepdims=True)
            x = c + rad * g * rng.random(m)[:, None] ** (1.0 / n)
        y = np.asarray(f(x), dtype=float)
        s1 += float(np.sum(y))
        s2 += float(np.sum(y * y))
        done += m
        batch += 1
    mean = s1 / total
    var = max(s2 / total - mean * mean, 0.0)
    return vol * mean, vol * np.sqrt(var / total)
