"""Convex body representations: polytopes, ellipsoids and radial bodies."""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction

import numpy as np
from scipy.spatial import ConvexHull, QhullError

from ..errors import CenterNotInteriorError, DegenerateBodyError, SantaloError
from ..sphere import ball_volume, grid_name, parse_grid_name, sphere_grid

CONTAINMENT_TOL = 1e-9


def _check_dim(dim):
    if not 1 <= dim <= 4:
        raise SantaloError(f"dimension must be in 1..4, got {dim}")


class ConvexBody:
    """Common interface. ``dim`` and ``interior_point`` are always set."""

    dim: int
    interior_point: np.ndarray

    def support(self, u):
        """Support function ``max_{y in K} <y, u>`` for rows of ``u``."""
        raise NotImplementedError

    def contains(self, x, tol=CONTAINMENT_TOL):
        raise NotImplementedError

    def diameter_bound(self):
        """Cheap upper bound on the diameter, used to scale tolerances."""
        raise NotImplementedError

    def boundary_distance(self, z):
        """Lower bound on the distance from ``z`` to the boundary (<= 0 outside)."""
        raise NotImplementedError

    def check_interior(self, z):
        z = np.asarray(z, dtype=float).reshape(self.dim)
        if not self.strictly_contains(z):
            raise CenterNotInteriorError("center not interior")
        return z

    def strictly_contains(self, z):
        raise NotImplementedError


# ---------------------------------------------------------------------
# polytopes
# ---------------------------------------------------------------------


def _as_fraction_rows(points):
    return tuple(tuple(Fraction(c) for c in row) for row in points)


class Polytope(ConvexBody):
    """Convex hull of a finite vertex list.

    Non-extreme input points are dropped. ``exact`` holds the vertices as
    rationals when they are known exactly (any binary64 input is exact).
    """

    def __init__(self, vertices, interior_point=None, exact=None):
        if exact is not None:
            exact_rows = _as_fraction_rows(exact)
            pts = np.array([[float(c) for c in row] for row in exact_rows], dtype=float)
        else:
            pts = np.asarray(vertices, dtype=float)
            if pts.ndim == 1:
                pts = pts[:, None]
            exact_rows = _as_fraction_rows(pts) if np.all(np.isfinite(pts)) else None
        if pts.ndim != 2 or not np.all(np.isfinite(pts)):
            raise DegenerateBodyError("degenerate body: vertices must be a finite 2D array")
        dim = pts.shape[1]
        _check_dim(dim)
        if pts.shape[0] < dim + 1:
            raise DegenerateBodyError("degenerate body: need at least dim+1 vertices")
        self.dim = dim
        if dim == 1:
            lo, hi = int(np.argmin(pts[:, 0])), int(np.argmax(pts[:, 0]))
            if not pts[hi, 0] > pts[lo, 0]:
                raise DegenerateBodyError("degenerate body: empty interior")
            keep = [lo, hi]
            self.hull = None
        else:
            try:
                hull = ConvexHull(pts)
            except QhullError as exc:
                raise DegenerateBodyError("degenerate body: hull has empty interior") from exc
            scale = np.ptp(pts, axis=0).max()
            if not hull.volume > 1e-12 * scale**dim:
                raise DegenerateBodyError("degenerate body: hull has empty interior")
            keep = list(hull.vertices)
        self.vertices = pts[keep]
        self.exact = None if exact_rows is None else tuple(exact_rows[i] for i in keep)
        if dim > 1:
            self.hull = ConvexHull(self.vertices)
        if interior_point is None:
            interior_point = self.vertices.mean(axis=0)
        self.interior_point = np.asarray(interior_point, dtype=float).reshape(dim)
        if not self.strictly_contains(self.interior_point):
            raise CenterNotInteriorError("interior_point is not interior")

    @property
    def halfspaces(self):
        """``(A, b)`` with ``K = {x : A x <= b}`` and unit-norm rows of ``A``."""
        if self.dim == 1:
            lo, hi = self.vertices[:, 0].min(), self.vertices[:, 0].max()
            return np.array([[-1.0], [1.0]]), np.array([-lo, hi])
        eq = self.hull.equations
        return eq[:, :-1], -eq[:, -1]

    def support(self, u):
        u = np.atleast_2d(np.asarray(u, dtype=float))
        return np.max(u @ self.vertices.T, axis=1)

    def boundary_distance(self, z):
        a, b = self.halfspaces
        return float(np.min(b - a @ np.asarray(z, dtype=float)))

    def strictly_contains(self, z):
        a, b = self.halfspaces
        slack = b - a @ np.asarray(z, dtype=float)
        return bool(np.all(slack > 1e-12 * self.diameter_bound()))

    def contains(self, x, tol=CONTAINMENT_TOL):
        a, b = self.halfspaces
        x = np.atleast_2d(np.asarray(x, dtype=float))
        return np.all(x @ a.T <= b + tol, axis=1)

    def diameter_bound(self):
        return float(np.linalg.norm(np.ptp(self.vertices, axis=0)))

    def to_dict(self):
        return {"kind": "polytope", "vertices": self.vertices.tolist()}

    def __repr__(self):
        return f"Polytope(dim={self.dim}, n_vertices={len(self.vertices)})"


# ---------------------------------------------------------------------
# ellipsoids
# ---------------------------------------------------------------------


class Ellipsoid(ConvexBody):
    """``{x : (x - c)^T A (x - c) <= 1}`` with ``A`` symmetric positive definite."""

    def __init__(self, center, shape):
        c = np.atleast_1d(np.asarray(center, dtype=float))
        a = np.atleast_2d(np.asarray(shape, dtype=float))
        _check_dim(c.size)
        if a.shape != (c.size, c.size):
            raise SantaloError("ellipsoid shape must be a dim x dim matrix")
        if not np.allclose(a, a.T, rtol=1e-12, atol=1e-14 * np.abs(a).max()):
            raise SantaloError("ellipsoid shape must be symmetric")
        a = 0.5 * (a + a.T)
        if np.linalg.eigvalsh(a).min() <= 0:
            raise DegenerateBodyError("degenerate body: shape must be positive definite")
        self.dim = c.size
        self.center = c
        self.shape = a
        self.interior_point = c.copy()

    @property
    def inverse(self):
        return np.linalg.inv(self.shape)

    def gauge(self, x):
        d = np.atleast_2d(np.asarray(x, dtype=float)) - self.center
        return np.sqrt(np.einsum("ij,jk,ik->i", d, self.shape, d))

    def support(self, u):
        u = np.atleast_2d(np.asarray(u, dtype=float))
        q = np.einsum("ij,jk,ik->i", u, self.inverse, u)
        return u @ self.center + np.sqrt(q)

    def strictly_contains(self, z):
        return bool(self.gauge(z)[0] < 1.0 - 1e-12)

    def boundary_distance(self, z):
        semi = 1.0 / math.sqrt(np.linalg.eigvalsh(self.shape).max())
        return float((1.0 - self.gauge(z)[0]) * semi)

    def contains(self, x, tol=CONTAINMENT_TOL):
        return self.gauge(x) <= 1.0 + tol

    def diameter_bound(self):
        return 2.0 / math.sqrt(np.linalg.eigvalsh(self.shape).min())

    def to_dict(self):
        return {"kind": "ellipsoid", "center": self.center.tolist(), "shape": self.shape.tolist()}

    def __repr__(self):
        return f"Ellipsoid(dim={self.dim})"


def ball(dim, center=None, radius=1.0):
    c = np.zeros(dim) if center is None else np.asarray(center, dtype=float)
    return Ellipsoid(c, np.eye(dim) / radius**2)


# ---------------------------------------------------------------------
# radial bodies
# ---------------------------------------------------------------------


class RadialBody(ConvexBody):
    """Star body ``{o + r u : 0 <= r <= rho(u)}`` sampled on a sphere grid.

    ``o`` is the interior point. Support values are the discrete maxima over
    the sampled boundary points, i.e. those of the inscribed polytope.
    """

    def __init__(self, dim, radii, grid_size=None, interior_point=None):
        _check_dim(dim)
        u, w = sphere_grid(dim, grid_size)
        radii = np.asarray(radii, dtype=float).reshape(-1)
        if radii.shape[0] != u.shape[0]:
            raise SantaloError(f"expected {u.shape[0]} radii for this sphere grid, got {radii.shape[0]}")
        if not np.all(radii > 0) or not np.all(np.isfinite(radii)):
            raise DegenerateBodyError("degenerate body: radii must be finite and > 0")
        self.dim = dim
        self.grid_size = u.shape[0] if grid_size is None else int(grid_size)
        self.directions = u
        self.weights = w
        self.radii = radii
        o = np.zeros(dim) if interior_point is None else np.asarray(interior_point, dtype=float)
        self.interior_point = o.reshape(dim)

    @classmethod
    def from_grid_name(cls, name, radii, interior_point=None):
        n, size = parse_grid_name(name)
        return cls(n, radii, size, interior_point)

    @property
    def grid(self):
        return grid_name(self.dim, self.grid_size)

    @property
    def boundary_points(self):
        return self.interior_point + self.radii[:, None] * self.directions

    def support(self, u):
        u = np.atleast_2d(np.asarray(u, dtype=float))
        return np.max(u @ self.boundary_points.T, axis=1)

    def strictly_contains(self, z):
        d = np.asarray(z, dtype=float) - self.interior_point
        h = self.support(self.directions) - self.directions @ self.interior_point
        return bool(np.all(self.directions @ d < h - 1e-12 * self.diameter_bound()))

    def boundary_distance(self, z):
        u = self.directions
        return float(np.min(self.support(u) - u @ np.asarray(z, dtype=float)))

    def contains(self, x, tol=CONTAINMENT_TOL):
        # discrete test against the sampled support halfspaces
        x = np.atleast_2d(np.asarray(x, dtype=float))
        h = self.support(self.directions)
        return np.all(x @ self.directions.T <= h + tol, axis=1)

    def diameter_bound(self):
        return 2.0 * float(self.radii.max())

    def to_dict(self):
        return {
            "kind": "radial",
            "grid": self.grid,
            "radii": self.radii.tolist(),
            "interior_point": self.interior_point.tolist(),
        }

    def __repr__(self):
        return f"RadialBody(dim={self.dim}, grid={self.grid})"


# ---------------------------------------------------------------------
# volume and centroid
# ---------------------------------------------------------------------


@dataclass(frozen=True)
class BodyMeasures:
    volume: float
    centroid: np.ndarray

    def to_dict(self):
        return {"volume": self.volume, "centroid": np.asarray(self.centroid).tolist()}


def _fan_measures(vertices, simplices, apex):
    d = vertices.shape[1]
    tri = vertices[simplices] - apex  # (m, d, d)
    vols = np.abs(np.linalg.det(tri)) / math.factorial(d)
    cents = apex + tri.sum(axis=1) / (d + 1)
    vol = float(vols.sum())
    return vol, (vols[:, None] * cents).sum(axis=0) / vol


def body_measures(body: ConvexBody) -> BodyMeasures:
    """Volume and centroid.

    Polytopes use a fan triangulation from an interior point, ellipsoids the
    closed form ``V(B^n)/sqrt(det A)``, radial bodies the sphere quadrature
    ``V = (1/n) sum w rho^n``.
    """
    if isinstance(body, Polytope):
        if body.dim == 1:
            lo, hi = body.vertices[:, 0].min(), body.vertices[:, 0].max()
            return BodyMeasures(float(hi - lo), np.array([0.5 * (lo + hi)]))
        vol, cen = _fan_measures(body.vertices, body.hull.simplices, body.interior_point)
        return BodyMeasures(vol, cen)
    if isinstance(body, Ellipsoid):
        vol = ball_volume(body.dim) / math.sqrt(np.linalg.det(body.shape))
        return BodyMeasures(vol, body.center.copy())
    if isinstance(body, RadialBody):
        n = body.dim
        w, r, u = body.weights, body.radii, body.directions
        vol = float(np.dot(w, r**n)) / n
        mom = (w * r ** (n + 1)) @ u / (n + 1)
        return BodyMeasures(vol, body.interior_point + mom / vol)
    raise SantaloError(f"unsupported body type {type(body).__name__}")
