"""Polar bodies ``K^z = {x : <x - z, y - z> <= 1 for all y in K}``."""

from __future__ import annotations

from fractions import Fraction

import numpy as np
from scipy.spatial import ConvexHull

from ..errors import CenterNotInteriorError, SantaloError
from .bodies import ConvexBody, Ellipsoid, Polytope, RadialBody, body_measures
from ..sphere import ball_volume


def _solve_exact(rows, rhs):
    """Gauss-Jordan elimination over the rationals; ``None`` if singular."""
    n = len(rows)
    m = [list(r) + [b] for r, b in zip(rows, rhs)]
    for col in range(n):
        piv = next((i for i in range(col, n) if m[i][col] != 0), None)
        if piv is None:
            return None
        m[col], m[piv] = m[piv], m[col]
        p = m[col][col]
        m[col] = [v / p for v in m[col]]
        for i in range(n):
            if i != col and m[i][col] != 0:
                f = m[i][col]
                m[i] = [a - f * b for a, b in zip(m[i], m[col])]
    return tuple(m[i][n] for i in range(n))


def _polytope_polar(body: Polytope, z, exact):
    d = body.dim
    if d == 1:
        lo, hi = body.vertices[:, 0].min(), body.vertices[:, 0].max()
        if exact and body.exact is not None:
            zf = Fraction(float(z[0]))
            xs = [row[0] for row in body.exact]
            a, b = min(xs) - zf, max(xs) - zf
            pts = ((zf + 1 / a,), (zf + 1 / b,))
            return Polytope(None, exact=pts, interior_point=z)
        return Polytope([[z[0] + 1.0 / (lo - z[0])], [z[0] + 1.0 / (hi - z[0])]], interior_point=z)

    shifted = body.vertices - z
    hull = ConvexHull(shifted)
    if exact and body.exact is not None and d <= 3:
        zf = tuple(Fraction(float(c)) for c in z)
        vex = [tuple(c - zc for c, zc in zip(row, zf)) for row in body.exact]
        found = set()
        for simplex in hull.simplices:
            x = _solve_exact([vex[i] for i in simplex], [Fraction(1)] * d)
            if x is None:
                raise CenterNotInteriorError("center not interior")
            found.add(x)
        # every candidate must be a genuine vertex of the polar
        for x in found:
            top = max(sum(a * b for a, b in zip(v, x)) for v in vex)
            if top != 1:
                raise SantaloError("inexact facet structure; retry with exact=False")
        rows = sorted(tuple(c + zc for c, zc in zip(x, zf)) for x in found)
        return Polytope(None, exact=rows, interior_point=z)

    # facet <a, x> + b = 0 with b < 0 dualizes to the vertex a / (-b)
    eq = hull.equations
    off = -eq[:, -1]
    if np.any(off <= 1e-14 * np.abs(shifted).max()):
        raise CenterNotInteriorError("center not interior")
    pts = eq[:, :-1] / off[:, None]
    scale = np.abs(pts).max()
    key = np.round(pts / (1e-9 * scale)).astype(np.int64)
    _, idx = np.unique(key, axis=0, return_index=True)
    return Polytope(pts[np.sort(idx)] + z, interior_point=z)


def _ellipsoid_polar(body: Ellipsoid, z):
    # K - z = {x : (x - d)^T A (x - d) <= 1}, d = c - z
    d = body.center - z
    ainv = body.inverse
    m = ainv - np.outer(d, d)
    minv_d = np.linalg.solve(m, d)
    center = -minv_d
    shape = m / (1.0 + d @ minv_d)
    return Ellipsoid(center + z, shape)


def _radial_polar(body: RadialBody, z):
    u = body.directions
    h = body.support(u) - u @ z
    if np.any(h <= 0):
        raise CenterNotInteriorError("center not interior")
    return RadialBody(body.dim, 1.0 / h, body.grid_size, interior_point=z)


def polar_body(body: ConvexBody, z, exact=True) -> ConvexBody:
    """Polar of ``body`` with respect to the interior point ``z``.

    Polytopes are dualized facet by facet: the facet through ``v_1..v_n``
    (after moving ``z`` to the origin) becomes the vertex solving
    ``<v_k, x> = 1``. In dimensions 1 to 3 this is done in exact rational
    arithmetic, so the double polar reproduces the input vertices exactly.
    Otherwise the vertices are read off the hull's facet equations.
    """
    z = body.check_interior(z)
    if isinstance(body, Polytope):
        return _polytope_polar(body, z, exact)
    if isinstance(body, Ellipsoid):
        return _ellipsoid_polar(body, z)
    if isinstance(body, RadialBody):
        return _radial_polar(body, z)
    raise SantaloError(f"unsupported body type {type(body).__name__}")


class PolarVolume:
    """Fast evaluator of ``z -> V(K^z)``, ``+inf`` outside the interior.

    For a polytope with facets ``<a_F, y> <= b_F`` the polar vertices are
    ``a_F / (b_F - <a_F, z>)``; the combinatorics do not depend on ``z``.
    """

    def __init__(self, body: ConvexBody):
        self.body = body
        self.dim = body.dim
        if isinstance(body, Polytope):
            a, b = body.halfspaces
            key = np.round(np.column_stack([a, b]) * 1e10).astype(np.int64)
            _, idx = np.unique(key, axis=0, return_index=True)
            self._a, self._b = a[idx], b[idx]
        elif isinstance(body, RadialBody):
            self._u = body.directions
            self._w = body.weights
            self._h = body.support(self._u)
        elif not isinstance(body, Ellipsoid):
            raise SantaloError(f"unsupported body type {type(body).__name__}")

    def __call__(self, z):
        z = np.asarray(z, dtype=float)
        body = self.body
        n = self.dim
        if isinstance(body, Polytope):
            slack = self._b - self._a @ z
            if np.any(slack <= 0):
                return np.inf
            pts = self._a / slack[:, None]
            if n == 1:
                return float(pts.max() - pts.min())
            return float(ConvexHull(pts).volume)
        if isinstance(body, Ellipsoid):
            d = body.center - z
            q = d @ body.shape @ d
            if q >= 1.0:
                return np.inf
            # V(K^z) = V(B^n) sqrt(det A) / (1 - q)^((n+1)/2)
            return ball_volume(n) * np.sqrt(np.linalg.det(body.shape)) / (1.0 - q) ** ((n + 1) / 2)
        h = self._h - self._u @ z
        if np.any(h <= 0):
            return np.inf
        return float(np.dot(self._w, h ** (-n))) / n


def volume_product(body: ConvexBody, z) -> float:
    """``V(K) V(K^z)``."""
    z = body.check_interior(z)
    return body_measures(body).volume * PolarVolume(body)(z)


__all__ = ["polar_body", "volume_product", "PolarVolume"]
