"""Discrete Legendre-Fenchel transforms on tensor grids.

A :class:`GridField` is an extended-real function sampled on a regular grid
over a box, and taken to be ``outside`` (``+inf`` for potentials, ``0`` for
densities) off the box. The transform of a field is therefore the transform
of the field plus the indicator of its box.

The d-dimensional transform factorizes into 1D conjugates along each axis.
The 1D conjugate is the linear-time algorithm: lower convex hull of the finite
samples, then a monotone merge of the sorted dual points against the sorted
hull slopes. Both passes are run in lockstep over all pencils of an axis, so
the Python-level loop count is linear in the axis length.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field as dc_field
from typing import Callable

import numpy as np

from .errors import EmptyDomainError, SantaloError

CONVEX = "known-convex"
NONCONVEX = "known-nonconvex"
UNKNOWN = "unknown"
_FLAGS = (CONVEX, NONCONVEX, UNKNOWN)


@dataclass
class GridField:
    """Extended-real field on a regular tensor grid.

    Parameters
    ----------
    lo, hi : array_like
        Box corners, ``lo < hi`` componentwise.
    values : ndarray
        Samples, shape ``(m_1, ..., m_n)`` with every ``m_k >= 4``. Entries
        are finite or ``+inf``; NaN and ``-inf`` are rejected.
    convex_flag : str
        One of ``"known-convex"``, ``"known-nonconvex"``, ``"unknown"``.
    outside : float
        Value taken off the box (``+inf`` for potentials, ``0`` for densities).
    source : callable, optional
        Exact evaluator used for off-grid queries instead of interpolation.
    """

    lo: np.ndarray
    hi: np.ndarray
    values: np.ndarray
    convex_flag: str = UNKNOWN
    outside: float = np.inf
    source: Callable | None = None
    meta: dict = dc_field(default_factory=dict)

    def __post_init__(self):
        self.lo = np.atleast_1d(np.asarray(self.lo, dtype=float))
        self.hi = np.atleast_1d(np.asarray(self.hi, dtype=float))
        self.values = np.asarray(self.values, dtype=float)
        n = self.lo.size
        if not 1 <= n <= 4:
            raise SantaloError(f"field dimension must be in 1..4, got {n}")
        if self.hi.size != n or self.values.ndim != n:
            raise SantaloError("box and values dimensions disagree")
        if np.any(self.lo >= self.hi):
            raise SantaloError("box.min must be < box.max componentwise")
        if min(self.values.shape) < 4:
            raise SantaloError("grid needs at least 4 samples per axis")
        if np.isnan(self.values).any():
            raise SantaloError("NaN in field values")
        if np.isneginf(self.values).any():
            raise SantaloError("-inf is not an admissible field value")
        if not np.isfinite(self.values).any():
            raise EmptyDomainError("empty effective domain")
        if self.convex_flag not in _FLAGS:
            raise SantaloError(f"bad convex_flag {self.convex_flag!r}")
        if self.convex_flag == CONVEX and not is_discretely_convex(self):
            raise SantaloError("field flagged convex fails the midpoint test")

    # -- grid geometry -------------------------------------------------
    @property
    def dim(self):
        return self.lo.size

    @property
    def shape(self):
        return self.values.shape

    @property
    def axes(self):
        return [np.linspace(a, b, m) for a, b, m in zip(self.lo, self.hi, self.shape)]

    @property
    def steps(self):
        return (self.hi - self.lo) / (np.asarray(self.shape) - 1)

    @property
    def cell_volume(self):
        return float(np.prod(self.steps))

    def points(self):
        """Grid nodes as an array of shape ``shape + (dim,)``."""
        return np.stack(np.meshgrid(*self.axes, indexing="ij"), axis=-1)

    # -- construction --------------------------------------------------
    @classmethod
    def from_function(cls, fun, lo, hi, shape, convex_flag=UNKNOWN, outside=np.inf, exact=True):
        """Sample ``fun`` (vectorized over points ``(..., n)``) on a grid."""
        lo = np.atleast_1d(np.asarray(lo, dtype=float))
        hi = np.atleast_1d(np.asarray(hi, dtype=float))
        if np.isscalar(shape) or np.ndim(shape) == 0:
            shape = (int(shape),) * lo.size
        axes = [np.linspace(a, b, m) for a, b, m in zip(lo, hi, shape)]
        pts = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1)
        vals = np.asarray(fun(pts), dtype=float)
        return cls(lo, hi, vals, convex_flag, outside, fun if exact else None)

    def map(self, func, outside=None):
        """Pointwise composition ``func(values)`` on the same grid."""
        out = func(np.asarray(self.outside)) if outside is None else outside
        src = None
        if self.source is not None:
            base = self.source
            src = lambda x: func(base(x))  # noqa: E731
        return GridField(self.lo, self.hi, func(self.values), UNKNOWN, float(out), src)

    def with_values(self, values, convex_flag=UNKNOWN):
        return GridField(self.lo, self.hi, values, convex_flag, self.outside)

    # -- evaluation ----------------------------------------------------
    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        if self.source is None:
            return interpolate(self, x)
        inside = _inside(self, x)
        out = np.full(x.shape[:-1], self.outside, dtype=float)
        if inside.any():
            out[inside] = self.source(x[inside])
        return out


def _inside(field, x, slack=1e-12):
    span = field.hi - field.lo
    return np.all((x >= field.lo - slack * span) & (x <= field.hi + slack * span), axis=-1)


def interpolate(field: GridField, x):
    """Multilinear interpolation; any cell touching a ``+inf`` node is ``+inf``."""
    x = np.asarray(x, dtype=float)
    lead = x.shape[:-1]
    pts = x.reshape(-1, field.dim)
    inside = _inside(field, pts)
    out = np.full(pts.shape[0], field.outside, dtype=float)
    if not inside.any():
        return out.reshape(lead)
    p = pts[inside]
    shape = np.asarray(field.shape)
    s = (p - field.lo) / field.steps
    idx = np.clip(np.floor(s).astype(np.intp), 0, shape - 2)
    t = np.clip(s - idx, 0.0, 1.0)
    acc = np.zeros(p.shape[0])
    hit_inf = np.zeros(p.shape[0], dtype=bool)
    for corner in itertools.product((0, 1), repeat=field.dim):
        c = np.asarray(corner)
        v = field.values[tuple((idx + c).T)]
        w = np.prod(np.where(c == 1, t, 1.0 - t), axis=1)
        inf = np.isinf(v)
        hit_inf |= inf
        acc += w * np.where(inf, 0.0, v)
    out[inside] = np.where(hit_inf, np.inf, acc)
    return out.reshape(lead)


def is_discretely_convex(field: GridField, tol=1e-9) -> bool:
    """Midpoint convexity along axis and diagonal stencils, up to ``tol``."""
    v = field.values
    n = field.dim
    dirs = []
    for k in range(n):
        e = [0] * n
        e[k] = 1
        dirs.append(e)
    for j, k in itertools.combinations(range(n), 2):
        for sgn in (1, -1):
            e = [0] * n
            e[j], e[k] = 1, sgn
            dirs.append(e)
    for d in dirs:
        lo_sl, mid_sl, hi_sl = [], [], []
        for dk in d:
            if dk == 0:
                lo_sl.append(slice(None))
                mid_sl.append(slice(None))
                hi_sl.append(slice(None))
            elif dk == 1:
                lo_sl.append(slice(0, -2))
                mid_sl.append(slice(1, -1))
                hi_sl.append(slice(2, None))
            else:
                lo_sl.append(slice(2, None))
                mid_sl.append(slice(1, -1))
                hi_sl.append(slice(0, -2))
        a, m, b = v[tuple(lo_sl)], v[tuple(mid_sl)], v[tuple(hi_sl)]
        both = np.isfinite(a) & np.isfinite(b)
        if np.any(both & np.isinf(m)):
            return False
        ok = np.isfinite(m) & both
        if np.any(a[ok] + b[ok] - 2.0 * m[ok] < -tol * (1.0 + np.abs(m[ok]))):
            return False
    return True


# ---------------------------------------------------------------------
# 1D conjugates
# ---------------------------------------------------------------------


def conjugate_1d_bruteforce(x, f, y):
    """O(N^2) reference: ``max_i y_j x_i - f_i`` over finite ``f_i``."""
    x = np.asarray(x, dtype=float)
    f = np.asarray(f, dtype=float)
    y = np.asarray(y, dtype=float)
    ok = np.isfinite(f)
    if not ok.any():
        return np.full(y.shape, -np.inf)
    return np.max(y[:, None] * x[None, ok] - f[None, ok], axis=1)


def conjugate_rows(x, F, y):
    """Linear-time conjugate of every row of ``F`` sampled at sorted ``x``.

    Returns ``G`` with ``G[p, j] = max_i y[j] x[i] - F[p, i]`` over finite
    entries (``-inf`` for rows with no finite entry). ``x`` and ``y`` must be
    increasing.
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    F = np.asarray(F, dtype=float)
    P, N = F.shape
    rows = np.arange(P)
    stack = np.zeros((P, N), dtype=np.intp)
    size = np.zeros(P, dtype=np.intp)

    # lower convex hull, lockstep over rows
    for i in range(N):
        fi = F[:, i]
        valid = np.isfinite(fi)
        if not valid.any():
            continue
        while True:
            cand = valid & (size >= 2)
            if not cand.any():
                break
            r = rows[cand]
            a = stack[r, size[r] - 2]
            b = stack[r, size[r] - 1]
            fa, fb, fc = F[r, a], F[r, b], fi[r]
            pop = (fb - fa) * (x[i] - x[b]) >= (fc - fb) * (x[b] - x[a])
            if not pop.any():
                break
            size[r[pop]] -= 1
        r = rows[valid]
        stack[r, size[r]] = i
        size[r] += 1

    # edge slopes of every hull, padded with +inf
    K = int(size.max()) if P else 0
    if K == 0:
        return np.full((P, y.size), -np.inf)
    hx = x[stack[:, :K]]
    hf = np.take_along_axis(F, stack[:, :K], axis=1)
    slopes = np.full((P, K), np.inf)
    if K > 1:
        with np.errstate(invalid="ignore", divide="ignore"):
            s = (hf[:, 1:] - hf[:, :-1]) / (hx[:, 1:] - hx[:, :-1])
        edge = np.arange(K - 1)[None, :] < (size - 1)[:, None]
        slopes[:, :-1] = np.where(edge, s, np.inf)

    # monotone merge of sorted y against increasing slopes
    ptr = np.zeros(P, dtype=np.intp)
    out = np.empty((P, y.size))
    empty = size == 0
    last = np.maximum(size - 1, 0)
    for j, yj in enumerate(y):
        while True:
            adv = (ptr < last) & (slopes[rows, ptr] < yj)
            if not adv.any():
                break
            ptr[adv] += 1
        best = yj * hx[rows, ptr] - hf[rows, ptr]
        # guard against slope rounding: also try hull neighbours
        for d in (-1, 1):
            q = ptr + d
            ok = (q >= 0) & (q <= last)
            qq = np.clip(q, 0, K - 1)
            alt = yj * hx[rows, qq] - hf[rows, qq]
            best = np.where(ok & (alt > best), alt, best)
        out[:, j] = best
    out[empty] = -np.inf
    return out


def _conjugate_along(A, axis, x, y):
    moved = np.moveaxis(A, axis, -1)
    lead = moved.shape[:-1]
    G = conjugate_rows(x, moved.reshape(-1, moved.shape[-1]), y)
    return np.moveaxis(G.reshape(lead + (y.size,)), -1, axis)


def conjugate_values(values, in_axes, out_axes):
    """``max_x <x, y> - values(x)`` for all ``y`` in the ``out_axes`` grid.

    Separable factorization: after conjugating along axis ``k`` the result is
    negated and passed to axis ``k+1``; ``-inf`` intermediates (empty pencils)
    become ``+inf`` and are skipped.
    """
    A = np.asarray(values, dtype=float)
    n = A.ndim
    for k in range(n):
        src = A if k == 0 else -A
        A = _conjugate_along(src, k, np.asarray(in_axes[k]), np.asarray(out_axes[k]))
    return A


def _slope_bound(values, steps):
    s = []
    for k in range(values.ndim):
        with np.errstate(invalid="ignore"):
            d = np.diff(values, axis=k) / steps[k]
        d = d[np.isfinite(d)]
        s.append(float(np.max(np.abs(d))) if d.size else 0.0)
    return np.asarray(s)


def dual_box(field: GridField, z=None):
    """Default dual box ``z + [-s, s]`` with ``s`` the largest finite
    difference quotient along each axis (``1`` when the field is flat)."""
    z = np.zeros(field.dim) if z is None else np.asarray(z, dtype=float)
    s = _slope_bound(field.values, field.steps)
    s = np.where(s > 0, s, 1.0)
    return z - s, z + s


def _stencil_design(n):
    t = np.array(list(itertools.product((-1.0, 0.0, 1.0), repeat=n)))
    cols = [np.ones(len(t))] + [t[:, i] for i in range(n)]
    pairs = [(i, j) for i in range(n) for j in range(i, n)]
    cols += [t[:, i] * t[:, j] for i, j in pairs]
    return t, np.linalg.pinv(np.stack(cols, axis=1)), pairs


def refine_conjugate(field: GridField, psi_values, out_axes, z):
    """Sub-grid refinement of a discrete transform.

    For each dual node the maximizer is located from the finite-difference
    gradient of the discrete transform; a quadratic is fitted to
    ``<x - z, y - z> - field(x)`` on the ``3^n`` stencil of primal nodes
    around it and its vertex value is taken when the fit is concave and the
    vertex stays inside the stencil. Stencils touching ``+inf`` are left
    alone, as are nodes where the refined value would not increase. The
    error of the discrete max drops from ``O(h^2)`` to ``O(h^3)`` for smooth
    fields.
    """
    n = field.dim
    psi = np.asarray(psi_values, dtype=float)
    if psi.ndim != n or min(field.shape) < 3:
        return psi
    t, pinv, pairs = _stencil_design(n)
    steps = field.steps
    lo = field.lo
    shape = np.asarray(field.shape)
    y = np.stack(np.meshgrid(*out_axes, indexing="ij"), axis=-1).reshape(-1, n)  # y - z
    flat = psi.reshape(-1)
    fin = np.isfinite(flat)
    out = flat.copy()
    if not fin.any():
        return psi
    with np.errstate(invalid="ignore"):
        grads = np.gradient(np.where(np.isfinite(psi), psi, np.nan), *out_axes) if n > 1 else [
            np.gradient(np.where(np.isfinite(psi), psi, np.nan), out_axes[0])
        ]
    xs = np.stack([g.reshape(-1) for g in grads], axis=-1) + z  # estimated maximizer
    ok = fin & np.all(np.isfinite(xs), axis=1)
    idx = np.rint((xs[ok] - lo) / steps).astype(np.intp)
    idx = np.clip(idx, 1, shape - 2)
    yy = y[ok]
    base = flat[ok]
    best = base.copy()
    for _ in range(2):
        nodes = idx[:, None, :] + t.astype(np.intp)[None]  # (k, 3^n, n)
        vals = field.values[tuple(np.moveaxis(nodes, -1, 0))]
        xpt = lo + nodes * steps
        h = np.einsum("kmi,ki->km", xpt - z, yy) - vals
        good = np.all(np.isfinite(h), axis=1)
        coef = np.where(good[:, None], h, 0.0) @ pinv.T
        b = coef[:, 1 : 1 + n]
        Q = np.zeros((len(h), n, n))
        for c, (i, j) in enumerate(pairs):
            v = coef[:, 1 + n + c]
            if i == j:
                Q[:, i, i] = 2.0 * v
            else:
                Q[:, i, j] = Q[:, j, i] = v
        lam = np.linalg.eigvalsh(Q)
        conc = good & (lam.max(axis=1) < 0)
        tv = np.zeros((len(h), n))
        if conc.any():
            tv[conc] = -np.linalg.solve(Q[conc], b[conc][..., None])[..., 0]
        inside = conc & np.all(np.abs(tv) <= 1.0, axis=1)
        peak = coef[:, 0] + 0.5 * np.einsum("ki,ki->k", b, tv)
        best = np.where(inside & (peak > best), peak, best)
        # recenter once on the stencil maximum when the vertex left the stencil
        shift = np.clip(np.rint(tv), -1, 1).astype(np.intp)
        move = conc & ~inside
        if not move.any():
            break
        idx = np.where(move[:, None], np.clip(idx + shift, 1, shape - 2), idx)
    out[ok] = best
    return out.reshape(psi.shape)


def legendre(field: GridField, z=None, dual=None, shape=None, refine=False) -> GridField:
    """Transform ``y -> max_x <x - z, y - z> - field(x)`` over the grid nodes.

    The result lives on ``dual`` (a ``(lo, hi)`` pair, default from
    :func:`dual_box`) with the primal grid shape unless ``shape`` is given.
    ``refine=True`` applies :func:`refine_conjugate`, which replaces the
    discrete maximum by a local quadratic model of the maximizer.
    """
    z = np.zeros(field.dim) if z is None else np.atleast_1d(np.asarray(z, dtype=float))
    if not np.isfinite(field.values).any():
        raise EmptyDomainError("empty effective domain")
    lo, hi = dual if dual is not None else dual_box(field, z)
    lo = np.atleast_1d(np.asarray(lo, dtype=float))
    hi = np.atleast_1d(np.asarray(hi, dtype=float))
    shape = field.shape if shape is None else tuple(shape)
    in_axes = [a - zk for a, zk in zip(field.axes, z)]
    out_axes = [np.linspace(a, b, m) - zk for a, b, m, zk in zip(lo, hi, shape, z)]
    vals = conjugate_values(field.values, in_axes, out_axes)
    if refine:
        vals = refine_conjugate(field, vals, out_axes, z)
    out = GridField(lo, hi, vals, UNKNOWN, np.inf)
    out.convex_flag = CONVEX
    out.meta = {"center": z.tolist(), "primal_box": (field.lo.tolist(), field.hi.tolist())}
    return out


def _hull_mask(field: GridField):
    """Grid nodes inside the convex hull of the finite nodes."""
    fin = np.isfinite(field.values)
    if fin.all():
        return fin
    pts = field.points()
    if field.dim == 1:
        x = pts[..., 0][fin]
        return (pts[..., 0] >= x.min()) & (pts[..., 0] <= x.max())
    from scipy.spatial import ConvexHull, QhullError

    try:
        hull = ConvexHull(pts[fin])
    except QhullError:
        return np.ones(field.shape, dtype=bool)
    eq = hull.equations
    tol = 1e-9 * float(np.max(field.steps))
    return np.all(pts @ eq[:, :-1].T + eq[:, -1] <= tol, axis=-1)


def biconjugate(field: GridField, z=None, dual=None) -> GridField:
    """Lower convex hull (grid semantics) sampled on the original grid.

    Nodes outside the convex hull of the finite nodes are ``+inf``: a finite
    dual box caps the slopes, so the conjugate pair alone would extend the
    hull linearly past the effective domain.
    """
    z = np.zeros(field.dim) if z is None else np.atleast_1d(np.asarray(z, dtype=float))
    psi = legendre(field, z, dual)
    in_axes = [a - zk for a, zk in zip(psi.axes, z)]
    out_axes = [a - zk for a, zk in zip(field.axes, z)]
    vals = conjugate_values(psi.values, in_axes, out_axes)
    vals = np.where(_hull_mask(field), vals, np.inf)
    out = GridField(field.lo, field.hi, vals, UNKNOWN, field.outside)
    out.convex_flag = CONVEX
    out.meta = {"center": z.tolist(), "dual_box": (psi.lo.tolist(), psi.hi.tolist())}
    return out


def fenchel_young_gap(phi: GridField, psi: GridField, z=None) -> float:
    """``min phi(x) + psi(y) - <x - z, y - z>`` over all finite grid pairs.

    Reduced exactly to ``min_y psi(y) - max_x (<x - z, y - z> - phi(x))``,
    the inner max being the discrete transform of ``phi`` on ``psi``'s grid.
    """
    z = np.zeros(phi.dim) if z is None else np.atleast_1d(np.asarray(z, dtype=float))
    in_axes = [a - zk for a, zk in zip(phi.axes, z)]
    out_axes = [a - zk for a, zk in zip(psi.axes, z)]
    L = conjugate_values(phi.values, in_axes, out_axes)
    ok = np.isfinite(psi.values) & np.isfinite(L)
    if not ok.any():
        raise SantaloError("vacuous: no finite (x, y) pair")
    return float(np.min(psi.values[ok] - L[ok]))


def boundary_effect_radius(field: GridField, z=None, dual=None) -> float:
    """Radius around ``z`` inside which the transform does not see the box.

    Compares the transform with the one of the field with its outer layer of
    nodes removed; returns the smallest ``|y - z|`` at which they differ.
    """
    z = np.zeros(field.dim) if z is None else np.atleast_1d(np.asarray(z, dtype=float))
    psi = legendre(field, z, dual)
    inner = field.values.copy()
    for k in range(field.dim):
        sl = [slice(None)] * field.dim
        sl[k] = 0
        inner[tuple(sl)] = np.inf
        sl[k] = -1
        inner[tuple(sl)] = np.inf
    in_axes = [a - zk for a, zk in zip(field.axes, z)]
    out_axes = [a - zk for a, zk in zip(psi.axes, z)]
    alt = conjugate_values(inner, in_axes, out_axes)
    diff = np.abs(alt - psi.values) > 1e-12 * (1.0 + np.abs(psi.values))
    if not diff.any():
        return float("inf")
    r = np.linalg.norm(psi.points() - z, axis=-1)
    return float(r[diff].min())
