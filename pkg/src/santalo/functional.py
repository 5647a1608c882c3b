"""Functional Santalo products, Ball's body ``K_{f,z}`` and its center.

Two conventions are supported and never mixed:

``HALF_SQUARE``
    ``f = rho(phi)``, ``g = rho(L_z phi)``; the extremal pair is
    ``phi = |x|^2/2`` and the reference is ``(int rho(|x|^2/2) dx)^2``.
``SQUARE``
    ``f = rho(2 phi)``, ``g = rho(2 L_z phi)``; the extremal pair is
    ``f = g = rho(|x|^2)`` with reference ``(int rho(|x|^2) dx)^2``, and
    ``f(x) g(y) <= rho(<x-z, y-z>)^2`` holds by log-concavity.
"""

from __future__ import annotations

import enum
import math
from dataclasses import asdict, dataclass

import numpy as np

from .errors import ConvergenceError, DegenerateBodyError, SantaloError
from .geometry.bodies import RadialBody, body_measures
from .quad import integrate_grid
from .sphere import sphere_grid
from .transform import GridField, legendre
from .weights import NormalizedWeight, reference_integral


class Convention(str, enum.Enum):
    HALF_SQUARE = "half-square"
    SQUARE = "square"

    @classmethod
    def parse(cls, value):
        if isinstance(value, cls):
            return value
        try:
            return cls(str(value))
        except ValueError:
            raise SantaloError(f"unknown convention {value!r}") from None

    @property
    def scale(self):
        """Factor applied to the potential before composing with ``rho``."""
        return 1.0 if self is Convention.HALF_SQUARE else 2.0


@dataclass(frozen=True)
class SantaloReport:
    convention: str
    z: tuple
    int_f: float
    int_g: float
    product: float
    reference: float
    deficit_minus: float
    deficit_plus: float

    def __post_init__(self):
        if not (self.int_f > 0 and self.int_g > 0):
            raise DegenerateBodyError("degenerate pair: zero integral")

    @classmethod
    def build(cls, convention, z, int_f, int_g, reference):
        if not (int_f > 0 and int_g > 0):
            raise DegenerateBodyError("degenerate pair: zero integral")
        product = int_f * int_g
        return cls(
            Convention.parse(convention).value,
            tuple(float(v) for v in np.atleast_1d(z)),
            float(int_f),
            float(int_g),
            float(product),
            float(reference),
            1.0 - product / reference,
            reference / product - 1.0,
        )

    def to_dict(self):
        d = asdict(self)
        d["z"] = list(self.z)
        return d


def compose(w: NormalizedWeight, field: GridField, convention=Convention.HALF_SQUARE) -> GridField:
    """Density ``rho(s * field)`` with ``s`` the convention scale; ``+inf -> 0``."""
    s = Convention.parse(convention).scale

    def rho(v):
        v = np.asarray(v, dtype=float)
        out = np.zeros(v.shape)
        fin = np.isfinite(v)
        out[fin] = w.rho(s * v[fin])
        return out

    return field.map(rho, outside=0.0)


def reference_value(w: NormalizedWeight, n: int, convention) -> float:
    conv = Convention.parse(convention)
    return reference_integral(w, n, conv is Convention.HALF_SQUARE) ** 2


def functional_product(
    w: NormalizedWeight,
    phi: GridField,
    z=None,
    convention=Convention.HALF_SQUARE,
    dual=None,
    reference=None,
) -> SantaloReport:
    """Product ``int rho(phi) * int rho(L_z phi)`` against the extremal reference.

    Both integrals are trapezoidal over the respective grids (the dual grid
    comes from :func:`santalo.transform.dual_box` unless ``dual`` is given).
    ``reference`` overrides the analytic reference value, e.g. with a
    grid-calibrated one.
    """
    conv = Convention.parse(convention)
    z = np.zeros(phi.dim) if z is None else np.atleast_1d(np.asarray(z, dtype=float))
    psi = legendre(phi, z, dual)
    f = compose(w, phi, conv)
    g = compose(w, psi, conv)
    int_f = integrate_grid(f)
    int_g = integrate_grid(g)
    if not (int_f > 0 and int_g > 0):
        raise DegenerateBodyError("degenerate pair: zero integral of f or g")
    ref = reference_value(w, phi.dim, conv) if reference is None else float(reference)
    return SantaloReport.build(conv, z, int_f, int_g, ref)


def _subsample(field: GridField, max_points):
    vals = field.values
    pts = field.points()
    total = vals.size
    if total > max_points:
        stride = int(math.ceil((total / max_points) ** (1.0 / field.dim)))
        sl = tuple(slice(None, None, stride) for _ in range(field.dim))
        vals, pts = vals[sl], pts[sl]
    return pts.reshape(-1, field.dim), vals.reshape(-1)


def product_hypothesis_check(
    w: NormalizedWeight,
    f: GridField,
    g: GridField,
    z=None,
    convention=Convention.SQUARE,
    max_points=4096,
) -> float:
    """``min 2 log rho(s) - log f(x) - log g(y)`` over grid pairs with ``s > 0``.

    ``s = <x - z, y - z>`` in the square convention and half of it in the
    half-square one. Pairs where ``f`` or ``g`` vanishes are vacuous. Grids
    larger than ``max_points`` nodes are subsampled with a uniform stride.
    Returns ``+inf`` when every pair is vacuous.
    """
    conv = Convention.parse(convention)
    z = np.zeros(f.dim) if z is None else np.atleast_1d(np.asarray(z, dtype=float))
    xs, fv = _subsample(f, max_points)
    ys, gv = _subsample(g, max_points)
    keep_x, keep_y = fv > 0, gv > 0
    xs, lf = xs[keep_x] - z, np.log(fv[keep_x])
    ys, lg = ys[keep_y] - z, np.log(gv[keep_y])
    best = math.inf
    chunk = max(1, 2_000_000 // max(len(ys), 1))
    for i in range(0, len(xs), chunk):
        s = xs[i : i + chunk] @ ys.T
        if conv is Convention.HALF_SQUARE:
            s = 0.5 * s
        pos = s > 0
        if not pos.any():
            continue
        with np.errstate(divide="ignore"):
            lr = -w.alpha(np.where(pos, s, 0.0))
        m = 2.0 * lr - lf[i : i + chunk, None] - lg[None, :]
        best = min(best, float(np.min(np.where(pos, m, np.inf))))
    return best


# ---------------------------------------------------------------------
# Ball's body
# ---------------------------------------------------------------------

_GL_X, _GL_W = np.polynomial.legendre.leggauss(4)
# 5-point Gauss-Lobatto: same degree, but it samples the endpoints
_LO_X = np.array([-1.0, -math.sqrt(3 / 7), 0.0, math.sqrt(3 / 7), 1.0])
_LO_W = np.array([0.1, 49 / 90, 32 / 45, 49 / 90, 0.1])


def _gl(f, z, u, a, b, n, rule=(_GL_X, _GL_W)):
    """Gauss-type rule on ``[a, b]`` along the rays ``z + r u``."""
    half = 0.5 * (b - a)
    mid = 0.5 * (b + a)
    total = np.zeros(a.shape)
    for xg, wg in zip(*rule):
        rr = mid + half * xg
        vals = f(z + rr[..., None] * u)
        total += wg * half * rr ** (n - 1) * vals
    return total


def ray_moments(f: GridField, z, directions, n=None, adaptive=True, rtol=1e-11, max_depth=48):
    """``int_0^inf r^(n-1) f(z + r u) dr`` for every row ``u`` of ``directions``.

    The ray is cut at every grid plane it crosses and at the box boundary;
    4-point Gauss-Legendre on each piece is exact for the multilinear
    interpolant (degree ``2n - 1 <= 7``). Fields with an exact ``source`` are
    evaluated through it instead; with ``adaptive`` their pieces are then
    bisected until whole and split rules agree to ``rtol`` times the ray
    total, which resolves jumps that do not sit on grid planes.
    """
    if f.outside != 0.0:
        raise DegenerateBodyError("unbounded/degenerate radial: field must vanish off its box")
    n = f.dim if n is None else n
    z = np.atleast_1d(np.asarray(z, dtype=float))
    u = np.atleast_2d(np.asarray(directions, dtype=float))
    if np.any(z <= f.lo) or np.any(z >= f.hi):
        raise SantaloError("ray origin must lie inside the field box")
    with np.errstate(divide="ignore", invalid="ignore"):
        exit_r = np.where(u > 0, (f.hi - z) / u, np.where(u < 0, (f.lo - z) / u, np.inf))
    rmax = exit_r.min(axis=1)
    cuts = [np.zeros((len(u), 1)), rmax[:, None]]
    for k, ax in enumerate(f.axes):
        with np.errstate(divide="ignore", invalid="ignore"):
            r = (ax[None, :] - z[k]) / u[:, k : k + 1]
        r = np.where(np.isfinite(r) & (r > 0), r, 0.0)
        cuts.append(np.minimum(r, rmax[:, None]))
    r = np.sort(np.concatenate(cuts, axis=1), axis=1)
    a, b = r[:, :-1], r[:, 1:]
    pieces = _gl(f, z, u[:, None, :], a, b, n)
    total = pieces.sum(axis=1)
    if not adaptive or f.source is None:
        return total
    # bisect pieces where Gauss and Lobatto disagree, flattened as (ray, a, b, value)
    ray = np.broadcast_to(np.arange(len(u))[:, None], a.shape)
    live = b > a
    ray, a, b, val = ray[live], a[live], b[live], pieces[live]
    scale = np.maximum(np.abs(total), np.finfo(float).tiny)
    for _ in range(max_depth):
        bad = np.abs(_gl(f, z, u[ray], a, b, n, (_LO_X, _LO_W)) - val) > rtol * scale[ray]
        if not bad.any():
            break
        ray, a, b, val = ray[bad], a[bad], b[bad], val[bad]
        m = 0.5 * (a + b)
        left = _gl(f, z, u[ray], a, m, n)
        right = _gl(f, z, u[ray], m, b, n)
        np.add.at(total, ray, left + right - val)
        ray = np.concatenate([ray, ray])
        a, b = np.concatenate([a, m]), np.concatenate([m, b])
        val = np.concatenate([left, right])
    return total


def ball_body(f: GridField, z=None, grid_size=None) -> RadialBody:
    """Radial body with ``rho(u) = (int_0^inf r^(n-1) f(z + r u) dr)^(1/n)``.

    Satisfies ``int f = n V(K_{f,z})`` up to quadrature error.
    """
    n = f.dim
    z = np.zeros(n) if z is None else np.atleast_1d(np.asarray(z, dtype=float))
    u, _ = sphere_grid(n, grid_size)
    mom = ray_moments(f, z, u)
    if not np.all(mom > 0):
        raise DegenerateBodyError("unbounded/degenerate radial: zero ray integral")
    return RadialBody(n, mom ** (1.0 / n), grid_size, interior_point=z)


def field_mean(f: GridField):
    """Barycenter ``int x f / int f`` of a density field."""
    mass = integrate_grid(f)
    if not mass > 0:
        raise DegenerateBodyError("degenerate density: zero integral")
    pts = f.points()
    out = np.empty(f.dim)
    for k in range(f.dim):
        out[k] = integrate_grid(f.with_values(f.values * pts[..., k])) / mass
    return out


@dataclass(frozen=True)
class CenterResult:
    z: np.ndarray
    centroid_norm: float
    iterations: int


def fm_center(f: GridField, tol=1e-8, grid_size=None, max_iter=500, z0=None) -> CenterResult:
    """Point ``z`` at which ``K_{f,z}`` has its centroid at ``z``.

    Chord Newton on ``c(z)``, the centroid of ``K_{f,z} - z``, from the
    barycenter of ``f``. The finite-difference Jacobian is reused until a
    step fails to decrease ``|c|``; if a fresh Jacobian also fails, the
    damped iteration ``z <- z + t c(z)`` takes over, halving ``t`` as
    needed. ``tol`` is relative to the mean radius of ``K_{f,z}``.
    """
    z = field_mean(f) if z0 is None else np.atleast_1d(np.asarray(z0, dtype=float))
    n = f.dim

    def offset(z):
        k = ball_body(f, z, grid_size)
        c = body_measures(k).centroid - z
        return c, float(np.mean(k.radii))

    def jacobian(z, c, scale):
        h = 1e-4 * scale
        J = np.empty((n, n))
        for i in range(n):
            e = np.zeros(n)
            e[i] = h
            J[:, i] = (offset(z + e)[0] - c) / h
        return J

    c, scale = offset(z)
    step = 0.5
    it = 0
    use_newton = True
    J = None
    fresh = False
    while np.linalg.norm(c) > tol * scale:
        if it >= max_iter or step < 1e-12:
            raise ConvergenceError("no convergence", best=z, value=float(np.linalg.norm(c)))
        it += 1
        cand = None
        if use_newton:
            try:
                if J is None:
                    J, fresh = jacobian(z, c, scale), True
                cand = z - np.linalg.solve(J, c)
            except (SantaloError, ValueError, np.linalg.LinAlgError):
                use_newton = False
        if cand is None:
            cand = z + step * c
        try:
            c_new, s_new = offset(cand)
        except (SantaloError, ValueError):
            use_newton = use_newton and not fresh
            J = None
            step *= 0.5
            continue
        if np.linalg.norm(c_new) < np.linalg.norm(c):
            z, c, scale = cand, c_new, s_new
            fresh = False
            if not use_newton:
                step = min(0.5, 2.0 * step)
        elif use_newton and not fresh:
            J = None  # stale Jacobian: refresh before giving up on Newton
        elif use_newton:
            use_newton = False
        else:
            step *= 0.5
    return CenterResult(z, float(np.linalg.norm(c)), it)


def polar_inclusion_check(f: GridField, g: GridField, z=None, w: NormalizedWeight | None = None, grid_size=None):
    """``max_u rho_{K_g}(u) h_{K_f}(u) - 1`` (``<= 0`` certifies ``K_g ⊂ K_f^o``).

    With a weight ``w`` the bodies are measured against the extremal pair
    ``f = g = rho(|x|^2)``: the product is divided by ``m^(2/n)`` where
    ``m = int r^(n-1) rho(r^2) dr``, so that the extremal pair gives 0.
    """
    n = f.dim
    z = np.zeros(n) if z is None else np.atleast_1d(np.asarray(z, dtype=float))
    kf = ball_body(f, z, grid_size)
    kg = ball_body(g, z, grid_size)
    u = kf.directions
    h = kf.support(u) - u @ z
    val = kg.radii * h
    if w is not None:
        val = val / w.moment(n) ** (2.0 / n)
    return float(val.max() - 1.0)
