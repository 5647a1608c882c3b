"""Deficits, stability fits and the deficit-versus-distance scans.

Two fit forms are provided. The Legendre form compares a potential with
``|x|^2/2 + c`` on the ball ``R(eps) B^n`` after an affine change of
variables; the functional form compares a pair of densities with the
extremal profile on the whole space. Fitted matrices are reported in the
extremal parametrization: ``phi(y) ~ |T (y - z)|^2 / 2 + c`` and
``f(y) ~ xi * rho(|T (y - z)|^2)``, ``g(y) ~ rho(|T^{-1} (y - z)|^2) / xi``.
"""

from __future__ import annotations

import csv
import io
import itertools
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy import ndimage
from scipy.optimize import least_squares, minimize

from .errors import (
    HypothesisViolatedError,
    NotLogConcaveError,
    OutOfRangeError,
    PreconditionError,
    SantaloError,
)
from .functional import (
    Convention,
    SantaloReport,
    ball_body,
    compose,
    field_mean,
    fm_center,
    reference_value,
)
from .geometry.bodies import body_measures
from .quad import QuadratureSpec, integrate_1d, integrate_grid
from .transform import CONVEX, GridField, biconjugate, legendre
from .weights import NormalizedWeight, validate_weight

EPS_FLOOR = float(np.finfo(float).eps)
DEGENERATE_EPS = 1e-6


# ---------------------------------------------------------------------
# small helpers
# ---------------------------------------------------------------------


def _alpha_inverse(w: NormalizedWeight, level: float) -> float:
    """Smallest ``t >= 0`` with ``alpha(t) >= level`` (bisection)."""
    if level <= 0:
        return 0.0
    hi = 1.0
    while not float(w.alpha(hi)) >= level:
        hi *= 2.0
        if hi > 1e300:
            raise OutOfRangeError("R out of range")
    lo = 0.0
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if float(w.alpha(mid)) >= level:
            hi = mid
        else:
            lo = mid
        if hi - lo <= 1e-15 * hi:
            break
    return hi


def _n_sym(n):
    return n * (n + 1) // 2


def _sym(vec, n):
    m = np.zeros((n, n))
    m[np.triu_indices(n)] = vec
    return m + np.triu(m, 1).T


def _sym_vec(m):
    return m[np.triu_indices(m.shape[0])]


def _sym_fun(m, fun):
    lam, v = np.linalg.eigh(0.5 * (m + m.T))
    return (v * fun(lam)) @ v.T


def _weighted_median(values, weights):
    order = np.argsort(values)
    cw = np.cumsum(weights[order])
    k = int(np.searchsorted(cw, 0.5 * cw[-1]))
    return float(values[order][min(k, len(values) - 1)])


def _workers():
    try:
        return max(1, int(os.environ.get("SANTALO_THREADS", "1")))
    except ValueError:
        return 1


# ---------------------------------------------------------------------
# R(eps) and the deficit
# ---------------------------------------------------------------------


def radius_R(w: NormalizedWeight, eps: float, n: int) -> float:
    """Radius ``R`` with ``rho(R^2) = eps^(1/(64 n^2))``.

    ``R`` grows without bound as ``eps -> 0``. Raises ``OutOfRangeError``
    when the target level is not attained on the representable range.
    """
    w = validate_weight(w) if not isinstance(w, NormalizedWeight) else w
    if not 0.0 < eps < 1.0:
        raise OutOfRangeError("R out of range: eps must lie in (0, 1)")
    if not w.strictly_decreasing:
        raise PreconditionError("rho must be strictly decreasing where positive")
    level = -math.log(eps) / (64.0 * n * n)
    return math.sqrt(_alpha_inverse(w, level))


def deficit(report: SantaloReport) -> float:
    """``1 - product / reference`` clamped at 0 (raw value stays in the report)."""
    return max(report.deficit_minus, 0.0)


def _product_in_center(w, phi, conv, dual, refine=False):
    """``z -> int rho(s L_z phi)`` through one transform at the origin.

    ``L_z phi(u + z) = L_0 phi(u) - <z, u>``, so the dual integral at any
    center is a pointwise reweighting of a single transform.
    """
    psi0 = legendre(phi, np.zeros(phi.dim), dual, refine=refine)
    s = Convention.parse(conv).scale
    u = psi0.points().reshape(-1, phi.dim)
    vals = psi0.values.reshape(-1)
    fin = np.isfinite(vals)
    u, vals = u[fin], vals[fin]
    wq = np.full(psi0.values.shape, psi0.cell_volume)
    for k, m in enumerate(psi0.shape):
        edge = [slice(None)] * phi.dim
        edge[k] = [0, m - 1]
        wq[tuple(edge)] *= 0.5
    wq = wq.reshape(-1)[fin]

    def dual_integral(z):
        return float(np.dot(wq, w.rho(s * (vals - u @ z))))

    return dual_integral


@dataclass(frozen=True)
class DeficitResult:
    report: SantaloReport
    eps: float
    z: np.ndarray

    def to_dict(self):
        return {"eps": self.eps, "z": self.z.tolist(), "report": self.report.to_dict()}


def best_center_deficit(
    w: NormalizedWeight,
    phi: GridField,
    convention=Convention.HALF_SQUARE,
    dual=None,
    reference=None,
    z0=None,
    center_tol=1e-6,
    refine=False,
) -> DeficitResult:
    """Deficit at the center minimizing the product, searched from the
    Fradelizi-Meyer center of ``rho(phi)`` by Nelder-Mead.

    ``refine`` enables the sub-grid transform refinement, which matters when
    the deficit is comparable to the squared grid step.
    """
    conv = Convention.parse(convention)
    n = phi.dim
    f = compose(w, phi, conv)
    if z0 is None:
        try:
            z0 = fm_center(f, tol=center_tol).z
        except SantaloError:
            z0 = field_mean(f)
    z0 = np.atleast_1d(np.asarray(z0, dtype=float))
    int_f = integrate_grid(f)
    dual_int = _product_in_center(w, phi, conv, dual, refine)
    scale = float(np.min(phi.hi - phi.lo))
    res = minimize(
        dual_int,
        z0,
        method="Nelder-Mead",
        options={
            "xatol": 1e-9 * scale,
            "fatol": 1e-15 * dual_int(z0),
            "initial_simplex": np.vstack([z0, z0 + 1e-2 * scale * np.eye(n)]),
            "maxiter": 2000,
        },
    )
    z = res.x if res.fun <= dual_int(z0) else z0
    ref = reference_value(w, n, conv) if reference is None else float(reference)
    rep = SantaloReport.build(conv, z, int_f, dual_int(z), ref)
    return DeficitResult(rep, deficit(rep), np.asarray(z, dtype=float))


# ---------------------------------------------------------------------
# quadrature on R B^n
# ---------------------------------------------------------------------


@dataclass(frozen=True)
class BallRule:
    points: np.ndarray
    weights: np.ndarray
    radius: float


def ball_rule(n: int, radius: float, cells: int | None = None) -> BallRule:
    """Cell quadrature on ``radius * B^n``.

    Cells inside the ball use their center; cells crossing the sphere are
    clipped by ``3^n`` sub-samples.
    """
    cells = cells or {1: 256, 2: 48, 3: 20, 4: 10}[n]
    h = 2.0 * radius / cells
    ax = -radius + h * (np.arange(cells) + 0.5)
    c = np.stack(np.meshgrid(*([ax] * n), indexing="ij"), axis=-1).reshape(-1, n)
    far = np.linalg.norm(np.abs(c) + 0.5 * h, axis=1)
    near = np.linalg.norm(np.maximum(np.abs(c) - 0.5 * h, 0.0), axis=1)
    vol = h**n
    inner = far <= radius
    edge = (~inner) & (near < radius)
    offs = np.array(list(itertools.product((-1.0, 0.0, 1.0), repeat=n))) * h / 3.0
    sub = (c[edge][:, None, :] + offs[None]).reshape(-1, n)
    sub = sub[np.linalg.norm(sub, axis=1) <= radius]
    pts = np.vstack([c[inner], sub])
    wts = np.concatenate([np.full(inner.sum(), vol), np.full(len(sub), vol / len(offs))])
    return BallRule(pts, wts, float(radius))


# ---------------------------------------------------------------------
# the fit record
# ---------------------------------------------------------------------


@dataclass
class StabilityFit:
    z: np.ndarray
    c: float
    xi: float
    T: np.ndarray
    R_eps: float
    l1_primal: float
    l1_dual: float
    psi_measure: list = field(default_factory=list)
    eps: float = 0.0
    form: str = "legendre"
    notes: list = field(default_factory=list)
    warning: str | None = None

    def __post_init__(self):
        self.T = 0.5 * (self.T + self.T.T)
        if np.linalg.eigvalsh(self.T).min() <= 0:
            raise SantaloError("fitted T must be positive definite")

    def to_dict(self):
        return {
            "form": self.form,
            "z": np.asarray(self.z).tolist(),
            "c": self.c,
            "xi": self.xi,
            "T": np.asarray(self.T).tolist(),
            "R_eps": self.R_eps,
            "eps": self.eps,
            "l1_primal": self.l1_primal,
            "l1_dual": self.l1_dual,
            "psi_measure": [list(r) for r in self.psi_measure],
            "notes": list(self.notes),
            "warning": self.warning,
        }


def _effective_eps(eps, notes):
    if eps < EPS_FLOOR:
        notes.append(f"deficit {eps:.3e} floored at machine epsilon for R(eps)")
        return EPS_FLOOR
    return min(eps, 1.0 - 1e-12)


def _capped_radius(w, eps, n, field_, z, notes):
    r = radius_R(w, eps, n)
    room = float(np.min(np.minimum(z - field_.lo, field_.hi - z)))
    if r > room:
        notes.append(f"R(eps) = {r:.6g} capped at the field box radius {room:.6g}")
        r = room
    return r


def _moment_matrix(f: GridField):
    mass = integrate_grid(f)
    mean = field_mean(f)
    pts = f.points() - mean
    cov = np.empty((f.dim, f.dim))
    for i in range(f.dim):
        for j in range(i + 1):
            cov[i, j] = cov[j, i] = integrate_grid(f.with_values(f.values * pts[..., i] * pts[..., j])) / mass
    return mean, cov


def _radial_variance(w, n, scale):
    """Per-axis variance of ``rho(scale |x|^2)``."""
    spec = QuadratureSpec(tol=1e-12)
    end = math.sqrt(w.support_end) if math.isfinite(w.support_end) else math.inf
    num = integrate_1d(lambda r: r ** (n + 1) * w.rho(r * r), 0.0, end, spec).value
    den = integrate_1d(lambda r: r ** (n - 1) * w.rho(r * r), 0.0, end, spec).value
    return float(num) / (n * float(den)) / scale


def _moment_T(f, w, scale):
    """``T`` from the second-moment matrix of ``f`` (extremal form)."""
    _, cov = _moment_matrix(f)
    try:
        root = _sym_fun(cov, lambda lam: np.maximum(lam, 1e-300) ** -0.5)
    except np.linalg.LinAlgError:
        return np.eye(f.dim)
    if not np.all(np.isfinite(root)) or np.linalg.eigvalsh(cov).min() <= 0:
        return np.eye(f.dim)
    return math.sqrt(_radial_variance(w, f.dim, scale)) * root


# ---------------------------------------------------------------------
# Legendre-form fit
# ---------------------------------------------------------------------


def _lsq_quadratic(phi_fun, pts, wts, z, T):
    """Weighted least-squares quadratic through ``phi`` near ``z``; returns (z, T) or None."""
    n = pts.shape[1]
    y = pts @ np.linalg.inv(T).T + z
    v = phi_fun(y)
    fin = np.isfinite(v)
    if fin.sum() < 4 * _n_sym(n) + n + 1:
        return None
    y, v, sw = y[fin], v[fin], np.sqrt(wts[fin])
    iu = np.triu_indices(n)
    quad = np.stack([y[:, i] * y[:, j] * (0.5 if i == j else 1.0) for i, j in zip(*iu)], axis=1)
    a = np.hstack([quad, y, np.ones((len(y), 1))])
    coef = np.linalg.lstsq(a * sw[:, None], v * sw, rcond=None)[0]
    H = _sym(coef[: len(iu[0])], n)
    lam = np.linalg.eigvalsh(H)
    if lam.min() <= 0 or not np.all(np.isfinite(H)):
        return None
    zc = -np.linalg.solve(H, coef[len(iu[0]) : len(iu[0]) + n])
    return zc, _sym_fun(H, np.sqrt)


def stability_fit_legendre(
    w,
    phi: GridField,
    tol: float = 1e-6,
    dual=None,
    reference=None,
    eps: float | None = None,
    z_center=None,
    restarts: int = 2,
    seed: int = 0,
    cells: int | None = None,
) -> StabilityFit:
    """Fit ``|x|^2/2 + c ~ phi(T^{-1} x + z)`` on ``R(eps) B^n`` in L1.

    ``eps`` is the deficit at the best center unless given. For fields not
    flagged convex the exceptional set ``Psi`` is excluded from the integral
    and its measure is tabulated. ``l1_dual`` evaluates the matching
    identity ``|x|^2/2 - c ~ L_z phi(T x + z)`` for the transform at the
    fitted ``z``. ``T`` is reported in extremal form, so ``phi = <x, A x>/2``
    gives ``T = A^(1/2)``.
    """
    w = validate_weight(w) if not isinstance(w, NormalizedWeight) else w
    n = phi.dim
    notes = []
    if eps is None:
        dres = best_center_deficit(w, phi, Convention.HALF_SQUARE, dual, reference, z0=z_center)
        eps, z_best = dres.eps, dres.z
    else:
        z_best = None
    eps_used = _effective_eps(eps, notes)
    f = compose(w, phi, Convention.HALF_SQUARE)
    if z_best is None:
        z_best = field_mean(f) if z_center is None else np.asarray(z_center, dtype=float)
    R = _capped_radius(w, eps_used, n, phi, z_best, notes)
    rule = ball_rule(n, R, cells)
    pts, wts = rule.points, rule.weights
    half = 0.5 * np.sum(pts * pts, axis=1)

    measurable = phi.convex_flag != CONVEX
    thr = eps_used ** (1.0 / (128.0 * n * n))
    phistar = biconjugate(phi, np.zeros(n), dual) if measurable else None

    def values(z, Tinv):
        y = pts @ Tinv.T + z
        v = phi(y)
        keep = np.ones(len(v), dtype=bool)
        if phistar is not None:
            keep = ~(v > phistar(y) + thr)
        return v, keep

    def objective(p, return_c=False):
        z = p[:n]
        Tinv = _sym_fun(_sym(p[n:], n), lambda lam: np.exp(-lam))
        v, keep = values(z, Tinv)
        d = v - half
        fin = np.isfinite(d) & keep
        if not fin.any():
            return 1e300
        c = _weighted_median(d[fin], wts[fin])
        total = float(np.dot(wts[fin], np.abs(d[fin] - c)))
        bad = (~np.isfinite(d)) & keep
        total += 1e6 * float(wts[bad].sum())
        return (total, c) if return_c else total

    T0 = _moment_T(f, w, 0.5)
    z0 = np.asarray(z_best, dtype=float)
    for _ in range(3):
        got = _lsq_quadratic(phi, pts, wts, z0, T0)
        if got is None:
            break
        z0, T0 = got
    S0 = _sym_fun(T0, np.log)
    x = np.concatenate([z0, _sym_vec(S0)])
    rng = np.random.default_rng(seed)
    best = (objective(x), x)
    res = None
    for k in range(restarts):
        start = best[1] if k == 0 else best[1] + 1e-3 * rng.standard_normal(best[1].size)
        res = minimize(
            objective,
            start,
            method="Nelder-Mead",
            options={
                "xatol": 1e-11,
                "fatol": 1e-16,
                "maxiter": 4000 * x.size,
                "initial_simplex": np.vstack([start, start + 1e-3 * np.eye(x.size)]),
                "adaptive": True,
            },
        )
        if res.fun < best[0]:
            best = (float(res.fun), res.x)
    p = best[1]
    l1, c = objective(p, return_c=True)
    z = p[:n]
    S = _sym(p[n:], n)
    T = _sym_fun(S, np.exp)
    psi = legendre(phi, z, dual)
    vd = psi(pts @ T.T + z)
    dd = half - c - vd
    fin = np.isfinite(dd)
    l1_dual = float(np.dot(wts[fin], np.abs(dd[fin]))) + 1e6 * float(wts[~fin].sum())
    table = []
    if measurable:
        rl = [R * q for q in (0.25, 0.5, 0.75, 1.0)]
        table = psi_measure(phi, w, eps_used, n, rl, dual=dual)["table"]
    warn = None
    if res is not None and not res.success:
        warn = "optimizer stagnation: " + str(res.message)
    return StabilityFit(z, float(c), 1.0, T, R, float(l1), l1_dual, table, float(eps), "legendre", notes, warn)


# ---------------------------------------------------------------------
# functional-form fit
# ---------------------------------------------------------------------


def _tensor_rule(n, radius, m=None):
    m = m or {1: 2001, 2: 101, 3: 41, 4: 19}[n]
    ax = np.linspace(-radius, radius, m)
    h = ax[1] - ax[0]
    w1 = np.full(m, h)
    w1[[0, -1]] *= 0.5
    pts = np.stack(np.meshgrid(*([ax] * n), indexing="ij"), axis=-1).reshape(-1, n)
    wts = np.ones(1)
    for _ in range(n):
        wts = np.multiply.outer(wts, w1).reshape(-1)
    return pts, wts


def density_evaluator(f: GridField):
    """Fast evaluator for a finite density field.

    Uses the exact ``source`` when present, otherwise a prefiltered cubic
    spline (clipped at 0) that vanishes off the box.
    """
    if f.source is not None:
        return f
    if not np.all(np.isfinite(f.values)):
        return f
    coef = ndimage.spline_filter(f.values, order=3, mode="nearest")
    lo, steps = f.lo, f.steps

    def ev(x):
        x = np.asarray(x, dtype=float)
        lead = x.shape[:-1]
        idx = ((x.reshape(-1, f.dim) - lo) / steps).T
        v = ndimage.map_coordinates(coef, idx, order=3, mode="constant", cval=0.0, prefilter=False)
        span = np.asarray(f.shape) - 1
        out = np.all((idx >= 0) & (idx <= span[:, None]), axis=0)
        return np.where(out, np.maximum(v, 0.0), f.outside).reshape(lead)

    return ev


def _center_offset(f, z):
    k = ball_body(f, z)
    return float(np.linalg.norm(body_measures(k).centroid - z) / np.mean(k.radii))


def stability_fit_functional(
    w,
    f: GridField,
    g: GridField,
    z=None,
    convention=Convention.SQUARE,
    tol: float = 1e-6,
    center_tol: float = 1e-6,
    restarts: int = 1,
    seed: int = 0,
    nodes: int | None = None,
    xatol: float = 1e-8,
) -> StabilityFit:
    """Fit ``xi, T`` with ``f ~ xi rho(|T (x - z)|^2)`` and ``g ~ rho(|T^{-1} (x - z)|^2) / xi``.

    Minimizes the sum of the two L1 distances (computed in the frame of the
    profile, as ``int |rho(|x|^2) - xi' f(T' x + z)|`` with ``xi' = 1/xi``,
    ``T' = T^{-1}``) and reports each normalized by
    ``int_0^inf r^(n-1) rho(s r^2) dr``. In the half-square convention the
    profile is ``rho(|x|^2/2)``. ``z`` is replaced by the Fradelizi-Meyer
    center when the centroid of ``K_{f,z}`` is off by more than ``center_tol``.
    """
    w = validate_weight(w) if not isinstance(w, NormalizedWeight) else w
    conv = Convention.parse(convention)
    n = f.dim
    notes = []
    s = 0.5 if conv is Convention.HALF_SQUARE else 1.0
    if z is None or _center_offset(f, np.asarray(z, dtype=float)) > center_tol:
        if z is not None:
            notes.append("center recomputed: centroid of K_{f,z} was off the origin")
        z = fm_center(f, tol=center_tol).z
    z = np.atleast_1d(np.asarray(z, dtype=float))
    norm = w.moment(n) / s ** (n / 2.0)
    t_hi = _alpha_inverse(w, 36.0) if math.isinf(w.support_end) else w.support_end
    radius = math.sqrt(min(t_hi, w.support_end) / s)
    pts, wts = _tensor_rule(n, radius, nodes)
    target = w.rho(s * np.sum(pts * pts, axis=1))
    mass_f, mass_g = integrate_grid(f), integrate_grid(g)
    fe, ge = density_evaluator(f), density_evaluator(g)

    def frames(p):
        S = _sym(p[1:], n)
        lam, v = np.linalg.eigh(S)
        Tf = (v * np.exp(-lam)) @ v.T
        Tb = (v * np.exp(lam)) @ v.T
        return math.exp(-p[0]), fe(pts @ Tf.T + z), ge(pts @ Tb.T + z), math.exp(-lam.sum())

    def residuals(p):
        xi_fit, u, q, _ = frames(p)
        sw = np.sqrt(wts)
        return np.concatenate([sw * (target - xi_fit * u), sw * (target - q / xi_fit)])

    def parts(p):
        xi_fit, u, q, det_f = frames(p)
        prim = float(np.dot(wts, np.abs(target - xi_fit * u)))
        prim += max(0.0, xi_fit * (mass_f / det_f - float(np.dot(wts, u))))
        dua = float(np.dot(wts, np.abs(target - q / xi_fit)))
        dua += max(0.0, (mass_g * det_f - float(np.dot(wts, q))) / xi_fit)
        return prim / norm, dua / norm

    def objective(p):
        a, b = parts(p)
        return a + b

    T0 = _moment_T(f, w, s)
    fz, gz = float(f(z[None])[0]), float(g(z[None])[0])
    xi0 = math.sqrt(fz / gz) if fz > 0 and gz > 0 else 1.0
    x = np.concatenate([[math.log(xi0)], _sym_vec(_sym_fun(T0, np.log))])
    # least-squares warm start, then an L1 polish
    ls = least_squares(residuals, x, method="lm", xtol=1e-10)
    if np.all(np.isfinite(ls.x)) and objective(ls.x) < objective(x):
        x = ls.x
    rng = np.random.default_rng(seed)
    best = (objective(x), x)
    res = None
    for k in range(restarts):
        start = best[1] if k == 0 else best[1] + 1e-3 * rng.standard_normal(x.size)
        res = minimize(
            objective,
            start,
            method="Nelder-Mead",
            options={
                "xatol": xatol,
                "fatol": 1e-13,
                "maxiter": 4000 * x.size,
                "initial_simplex": np.vstack([start, start + 2e-3 * np.eye(x.size)]),
                "adaptive": True,
            },
        )
        if res.fun < best[0]:
            best = (float(res.fun), res.x)
    p = best[1]
    prim, dua = parts(p)
    T = _sym_fun(_sym(p[1:], n), np.exp)
    warn = None
    if res is not None and not res.success:
        warn = "optimizer stagnation: " + str(res.message)
    ref = reference_value(w, n, conv)
    eps = max(ref / (mass_f * mass_g) - 1.0, 0.0)
    eps_used = _effective_eps(eps, notes)
    R = radius_R(w, eps_used, n)
    return StabilityFit(z, 0.0, math.exp(p[0]), T, R, prim, dua, [], eps, "functional", notes, warn)


# ---------------------------------------------------------------------
# the exceptional set Psi
# ---------------------------------------------------------------------


def psi_measure(phi: GridField, w, eps: float, n: int | None = None, R_list=(1.0,), z=None, dual=None, eta=None):
    """Volume of ``Psi = {x : phi(x) > phi_*(x) + eps^(1/(128 n^2))}`` inside ``R B^n``.

    Volumes count grid nodes times the cell volume. With ``eta`` the bound
    ``eta sqrt(eps) R^n`` is reported next to each volume.
    """
    n = phi.dim if n is None else n
    if not 0.0 < eps < 1.0:
        raise OutOfRangeError("eps must lie in (0, 1)")
    z = np.zeros(phi.dim) if z is None else np.asarray(z, dtype=float)
    thr = eps ** (1.0 / (128.0 * n * n))
    star = biconjugate(phi, z, dual)
    with np.errstate(invalid="ignore"):
        mask = phi.values > star.values + thr
    r = np.linalg.norm(phi.points() - z, axis=-1)
    rows = []
    bound = []
    for R in sorted(float(v) for v in R_list):
        vol = float(np.count_nonzero(mask & (r <= R))) * phi.cell_volume
        rows.append((R, vol))
        if eta is not None:
            b = float(eta) * math.sqrt(eps) * R**n
            bound.append({"R": R, "volume": vol, "bound": b, "holds": vol <= b})
    out = {"threshold": thr, "table": rows, "cell_volume": phi.cell_volume}
    if eta is not None:
        out["bound"] = bound
    return out


# ---------------------------------------------------------------------
# the one-dimensional center estimate
# ---------------------------------------------------------------------


@dataclass(frozen=True)
class CenterCheck:
    lhs: float
    rhs: float
    eps_measured: float
    eps_in: float
    in_range: bool
    passed: bool
    n: int

    def to_dict(self):
        return {
            "lhs": self.lhs,
            "rhs": self.rhs,
            "eps_measured": self.eps_measured,
            "eps_in": self.eps_in,
            "in_range": self.in_range,
            "passed": self.passed,
            "n": self.n,
        }


def center_bound(eps, n):
    """``250 n eps^(1/(n+1))`` (multiply by ``omega(0)``)."""
    return 250.0 * n * np.power(eps, 1.0 / (n + 1.0))


def eps_range_limit(n):
    return (250.0 * n) ** -(n + 1.0)


def _loglike_concave(fun, r):
    v = fun(r)
    pos = v > 0
    if not pos.any():
        return False
    idx = np.flatnonzero(pos)
    if not np.all(pos[idx[0] : idx[-1] + 1]):
        return False
    lv = np.log(v[idx[0] : idx[-1] + 1])
    rr = r[idx[0] : idx[-1] + 1]
    slope = np.diff(lv) / np.diff(rr)
    return bool(np.all(np.diff(slope) <= 1e-7 * (1.0 + np.abs(slope[1:]))))


def _sinh_nodes(scale=0.01, umax=9.0, count=4001):
    u = np.linspace(-umax, umax, count)
    r = scale * np.sinh(u)
    dr = scale * np.cosh(u) * (u[1] - u[0])
    dr[[0, -1]] *= 0.5
    return r, dr


def logconcave_center_check(h, omega, n: int, eps_in: float, check_shape: bool = True) -> CenterCheck:
    """Check ``|h(0) - omega(0)| <= 250 n eps^(1/(n+1)) omega(0)``.

    The hypothesis ``int |r|^(n-1) |h - omega| <= eps_in int |r|^(n-1) omega``
    is verified by quadrature (``HypothesisViolatedError`` otherwise). The
    bound is evaluated for any ``eps_in``; ``in_range`` records whether
    ``eps_in < (250 n)^-(n+1)``, the range where it is a theorem.
    """
    def H(r):
        return np.asarray(h(np.asarray(r, dtype=float)), dtype=float)

    def W(r):
        return np.asarray(omega(np.asarray(r, dtype=float)), dtype=float)

    if check_shape:
        r = np.linspace(-20.0, 20.0, 8001)
        if np.max(np.abs(W(r) - W(-r))) > 1e-12 * max(1.0, float(W(0.0))):
            raise SantaloError("omega must be even")
        if not _loglike_concave(W, r):
            raise NotLogConcaveError("not log-concave: omega")
        if not _loglike_concave(H, r):
            raise NotLogConcaveError("not log-concave: h")
    spec = QuadratureSpec(tol=1e-13, max_evals=200_000)

    def radial(fun):
        a = integrate_1d(lambda r: r ** (n - 1) * fun(r), 0.0, np.inf, spec).value
        b = integrate_1d(lambda r: r ** (n - 1) * fun(-r), 0.0, np.inf, spec).value
        return float(a) + float(b)

    diff = radial(lambda r: np.abs(H(r) - W(r)))
    base = radial(W)
    eps_m = diff / base
    if eps_m > eps_in:
        raise HypothesisViolatedError(f"hypothesis violated: measured {eps_m:.3e} > eps_in {eps_in:.3e}")
    w0 = float(W(0.0))
    lhs = abs(float(H(0.0)) - w0)
    rhs = float(center_bound(eps_in, n)) * w0
    return CenterCheck(lhs, rhs, eps_m, float(eps_in), eps_in < eps_range_limit(n), lhs <= rhs, n)


def center_search(count: int = 10_000, eps_max: float = 1e-4, n_values=(1, 2, 3), seed: int = 0, batch: int = 500):
    """Random search for violations of the center bound.

    Pairs are ``omega(r) = exp(-|r|^p - b r^2)`` and
    ``h(r) = exp(a + k r - tau |r - c2|) * omega(s (r - c))``, all
    log-concave, with perturbation sizes drawn log-uniformly. A pair enters
    the corpus when its measured ``eps`` lies in ``(0, eps_max]``; the bound
    is evaluated at the measured ``eps``. Returns counts and the worst ratio
    ``lhs / rhs``.
    """
    rng = np.random.Generator(np.random.Philox(seed))
    r, dr = _sinh_nodes()
    absr = np.abs(r)
    accepted = 0
    tried = 0
    worst = 0.0
    worst_params = None
    violations = 0
    in_range = 0
    per_n = {int(k): 0 for k in n_values}
    while accepted < count:
        if tried > 200 * count:
            raise SantaloError("corpus generation stalled")
        m = batch
        n = rng.choice(np.asarray(n_values), size=m)
        p = rng.uniform(1.0, 3.0, m)
        b = rng.uniform(0.0, 1.0, m) * (rng.random(m) < 0.5)
        size = 10.0 ** rng.uniform(-8.0, -1.0, m)
        mix = rng.uniform(-1.0, 1.0, (m, 6)) * (rng.random((m, 6)) < 0.6)
        a = size * mix[:, 0]
        k = size * mix[:, 1]
        tau = size * np.abs(mix[:, 2])
        c2 = 0.5 * mix[:, 3]
        c = size * mix[:, 4]
        s = np.exp(size * mix[:, 5])
        with np.errstate(over="ignore", under="ignore"):
            lw = -np.power(absr[None], p[:, None]) - b[:, None] * r[None] ** 2
            om = np.exp(lw)
            y = s[:, None] * (r[None] - c[:, None])
            lh = (
                a[:, None]
                + k[:, None] * r[None]
                - tau[:, None] * np.abs(r[None] - c2[:, None])
                - np.power(np.abs(y), p[:, None])
                - b[:, None] * y**2
            )
            hh = np.exp(lh)
        wr = np.power(absr[None], (n - 1)[:, None]) * dr[None]
        eps = np.sum(wr * np.abs(hh - om), axis=1) / np.sum(wr * om, axis=1)
        h0 = np.exp(a + k * 0.0 - tau * np.abs(c2) - np.power(np.abs(s * c), p) - b * (s * c) ** 2)
        lhs = np.abs(h0 - 1.0)
        ok = (eps > 0) & (eps <= eps_max)
        tried += m
        idx = np.flatnonzero(ok)[: count - accepted]
        if idx.size == 0:
            continue
        rhs = center_bound(eps[idx], n[idx])
        ratio = lhs[idx] / rhs
        violations += int(np.sum(ratio > 1.0))
        in_range += int(np.sum(eps[idx] < eps_range_limit(n[idx])))
        j = int(np.argmax(ratio))
        if ratio[j] > worst:
            worst = float(ratio[j])
            q = idx[j]
            worst_params = {
                "n": int(n[q]), "p": float(p[q]), "b": float(b[q]), "a": float(a[q]), "k": float(k[q]),
                "tau": float(tau[q]), "c2": float(c2[q]), "c": float(c[q]), "s": float(s[q]), "eps": float(eps[q]),
            }
        for v in n[idx]:
            per_n[int(v)] += 1
        accepted += idx.size
    return {
        "pairs": accepted,
        "tried": tried,
        "violations": violations,
        "worst_ratio": worst,
        "worst_pair": worst_params,
        "in_proven_range": in_range,
        "per_n": per_n,
        "seed": seed,
    }


# ---------------------------------------------------------------------
# scans
# ---------------------------------------------------------------------


FAMILIES = ("truncated-quadratic", "bump", "quadratic")
_DEFAULT_BOX = 8.0
_DEFAULT_GRID = {1: 2049, 2: 256, 3: 48}
_SCAN_NODES = {1: 1001, 2: 61, 3: 31}  # coarser fit rule along scans


def family_field(family: str, delta: float, n: int = 2, box: float = _DEFAULT_BOX, grid=None) -> GridField:
    """Member ``phi_delta`` of a built-in perturbation family.

    ``truncated-quadratic``
        ``|x|^2/2`` on ``|x| <= |log delta|`` and ``+inf`` outside.
    ``bump``
        ``|x|^2/2 + delta exp(-|x - e_1|^2 / 2)``, convex for ``delta < 1``.
    ``quadratic``
        ``<x, (I + delta S) x>/2`` with a fixed symmetric ``S`` of norm 1.
    """
    grid = grid or _DEFAULT_GRID[n]
    lo, hi = -box * np.ones(n), box * np.ones(n)
    if family == "truncated-quadratic":
        if not 0.0 < delta < 1.0:
            raise OutOfRangeError("delta must lie in (0, 1)")
        rc = abs(math.log(delta))

        def fun(x):
            q = np.sum(x * x, axis=-1)
            return np.where(q <= rc * rc, 0.5 * q, np.inf)

        return GridField.from_function(fun, lo, hi, grid, CONVEX, np.inf)
    if family == "bump":
        if not 0.0 <= delta < 1.0:
            raise OutOfRangeError("delta must lie in [0, 1)")
        x1 = np.zeros(n)
        x1[0] = 1.0

        def fun(x):
            q = np.sum(x * x, axis=-1)
            return 0.5 * q + delta * np.exp(-0.5 * np.sum((x - x1) ** 2, axis=-1))

        return GridField.from_function(fun, lo, hi, grid, CONVEX, np.inf)
    if family == "quadratic":
        S = np.eye(n)
        S[0, 0] = 1.0
        if n > 1:
            S[1, 1] = -1.0
            S[0, 1] = S[1, 0] = 0.5
        S /= np.linalg.norm(S, 2)
        A = np.eye(n) + delta * S
        if np.linalg.eigvalsh(A).min() <= 0:
            raise OutOfRangeError("delta too large: I + delta S is not positive definite")

        def fun(x):
            return 0.5 * np.einsum("...i,ij,...j->...", x, A, x)

        return GridField.from_function(fun, lo, hi, grid, CONVEX, np.inf)
    raise SantaloError(f"unknown family {family!r}; expected one of {FAMILIES}")


def default_deltas(family: str, steps: int = 6):
    if family == "truncated-quadratic":
        return sorted(float(math.exp(-c)) for c in np.linspace(1.5, 4.0, steps))
    if family == "bump":
        return [float(v) for v in np.geomspace(0.0125, 0.4, steps)]
    if family == "quadratic":
        return [float(v) for v in np.geomspace(0.05, 0.4, steps)]
    raise SantaloError(f"unknown family {family!r}; expected one of {FAMILIES}")


@dataclass
class ScanPoint:
    delta: float
    eps: float
    R: float
    l1_primal: float
    l1_dual: float
    l1_legendre: float
    distance: float
    exponent_running: float = math.nan


@dataclass
class ScanCurve:
    family_id: str
    n: int
    points: list
    fitted_exponent: float
    fitted_constant: float
    calibrated_constant: float
    calibrated_bound_ok: bool
    monotone_eps: bool
    monotone_distance: bool
    degenerate: bool
    flags: list = field(default_factory=list)
    settings: dict = field(default_factory=dict)

    def to_dict(self):
        return {
            "family_id": self.family_id,
            "n": self.n,
            "points": [vars(p) for p in self.points],
            "fitted_exponent": self.fitted_exponent,
            "fitted_constant": self.fitted_constant,
            "calibrated_constant": self.calibrated_constant,
            "calibrated_bound_ok": self.calibrated_bound_ok,
            "monotone_eps": self.monotone_eps,
            "monotone_distance": self.monotone_distance,
            "degenerate": self.degenerate,
            "flags": list(self.flags),
            "settings": dict(self.settings),
        }

    CSV_COLUMNS = ("delta", "eps", "R", "l1_primal", "l1_dual", "l1_legendre", "distance", "exponent_running")

    def to_csv(self) -> str:
        buf = io.StringIO()
        wr = csv.writer(buf, lineterminator="\n")
        wr.writerow(self.CSV_COLUMNS)
        for p in self.points:
            wr.writerow([repr(float(getattr(p, c))) for c in self.CSV_COLUMNS])
        return buf.getvalue()


def _scan_point(w, family, delta, n, box, grid, reference, dual):
    phi = family_field(family, delta, n, box, grid)
    f = compose(w, phi, Convention.HALF_SQUARE)
    zc = fm_center(f, tol=1e-7).z
    dres = best_center_deficit(w, phi, Convention.HALF_SQUARE, dual, reference, z0=zc, refine=True)
    leg = stability_fit_legendre(w, phi, eps=dres.eps, z_center=dres.z, dual=dual, restarts=1)
    psi = legendre(phi, zc, dual, refine=True)
    g = compose(w, psi, Convention.HALF_SQUARE)
    fun = stability_fit_functional(w, f, g, zc, Convention.HALF_SQUARE, center_tol=1e-5, xatol=1e-6,
                                   nodes=_SCAN_NODES.get(n))
    dist = max(fun.l1_primal, fun.l1_dual)
    return ScanPoint(float(delta), dres.eps, leg.R_eps, fun.l1_primal, fun.l1_dual, leg.l1_primal, dist)


def _loglog_fit(eps, dist):
    x, y = np.log(eps), np.log(dist)
    a, logc = np.polyfit(x, y, 1)
    return float(a), float(math.exp(logc))


def stability_scan(
    family: str,
    n: int = 2,
    steps: int = 6,
    deltas=None,
    w=None,
    box: float = _DEFAULT_BOX,
    grid: int | None = None,
) -> ScanCurve:
    """Deficit and fitted distance along a perturbation family.

    The deficit is the infimum over centers of the half-square product,
    measured against the same quadrature applied to ``|x|^2/2`` so that the
    discretization error cancels. The distance is the larger of the two
    functional-form L1 errors of ``(rho(phi), rho(L_z phi))`` at the
    Fradelizi-Meyer center; ``l1_legendre`` is the Legendre-form error on
    ``R(eps) B^n``. ``log d ~ a log eps + log C`` is fitted by least squares
    and ``d <= C' eps^(1/(129 n^2))`` is checked with ``C'`` calibrated at the
    largest ``delta``.
    """
    w = validate_weight(w or {"kind": "exp", "rate": 1.0})
    grid = grid or _DEFAULT_GRID[n]
    deltas = sorted(float(d) for d in (deltas if deltas is not None else default_deltas(family, steps)))
    if not deltas:
        raise SantaloError("empty delta grid")
    lo, hi = -box * np.ones(n), box * np.ones(n)
    dual = (lo, hi)
    quad = GridField.from_function(lambda x: 0.5 * np.sum(x * x, axis=-1), lo, hi, grid)
    ref = best_center_deficit(w, quad, Convention.HALF_SQUARE, dual, z0=np.zeros(n), refine=True).report.product

    def run(d):
        return _scan_point(w, family, d, n, box, grid, ref, dual)

    workers = _workers()
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as ex:
            pts = list(ex.map(run, deltas))
    else:
        pts = [run(d) for d in deltas]
    eps = np.array([p.eps for p in pts])
    dist = np.array([p.distance for p in pts])
    flags = []
    mono_e = bool(np.all(np.diff(eps) > 0))
    mono_d = bool(np.all(np.diff(dist) > 0))
    degenerate = bool(eps.max() < DEGENERATE_EPS)
    if degenerate:
        flags.append("degenerate: deficit vanishes along the family (equality manifold)")
    if not mono_e:
        flags.append("non-monotone deficit along the family")
    if not mono_d:
        flags.append("non-monotone distance along the family")
    live = (eps > 0) & (dist > 0)
    a = cst = math.nan
    cal = math.nan
    bound_ok = False
    if live.sum() >= 2 and not degenerate:
        a, cst = _loglog_fit(eps[live], dist[live])
        for i in range(len(pts)):
            sel = live[: i + 1]
            if sel.sum() >= 2:
                pts[i].exponent_running = _loglog_fit(eps[: i + 1][sel], dist[: i + 1][sel])[0]
        k = 1.0 / (129.0 * n * n)
        cal = float(dist[-1] / eps[-1] ** k)
        bound_ok = bool(np.all(dist[live] <= cal * eps[live] ** k * (1.0 + 1e-12)))
    settings = {"box": box, "grid": grid, "weight": w.to_dict(), "reference_product": ref}
    return ScanCurve(family, n, pts, a, cst, cal, bound_ok, mono_e, mono_d, degenerate, flags, settings)


def truncation_deficit(cutoff: float) -> float:
    """Closed-form half-square deficit of the truncated quadratic for ``rho = e^{-t}``, ``n = 2``."""
    s = 0.5 * cutoff * cutoff
    return 1.0 - (1.0 - math.exp(-s)) * (1.0 + math.exp(-s) / (2.0 * s))


__all__ = [
    "BallRule",
    "CenterCheck",
    "DeficitResult",
    "FAMILIES",
    "ScanCurve",
    "ScanPoint",
    "StabilityFit",
    "ball_rule",
    "best_center_deficit",
    "center_bound",
    "center_search",
    "default_deltas",
    "deficit",
    "eps_range_limit",
    "family_field",
    "logconcave_center_check",
    "psi_measure",
    "radius_R",
    "stability_fit_functional",
    "stability_fit_legendre",
    "stability_scan",
    "truncation_deficit",
]
