"""Ellipsoid sandwich check around the centroid."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ..errors import OutOfRangeError, PreconditionError, SantaloError
from ..sphere import sphere_grid
from .bodies import CONTAINMENT_TOL, ConvexBody, Ellipsoid, Polytope, body_measures

CENTROID_TOL = 1e-8  # relative to the diameter


@dataclass(frozen=True)
class SandwichInput:
    body: ConvexBody
    ellipsoid: Ellipsoid
    w: np.ndarray
    mu: float

    def __post_init__(self):
        n = self.body.dim
        if self.ellipsoid.dim != n:
            raise SantaloError("body and ellipsoid dimensions differ")
        if np.any(np.abs(self.ellipsoid.center) > 0):
            raise SantaloError("ellipsoid must be centered at the origin")
        if not 0.0 < self.mu < 1.0 / (n + 1):
            raise OutOfRangeError("mu must lie in (0, 1/(n+1))")
        object.__setattr__(self, "w", np.asarray(self.w, dtype=float).reshape(n))


def _scaled(e: Ellipsoid, s):
    return Ellipsoid(e.center, e.shape / s**2)


def _ellipsoid_in(e: Ellipsoid, body: ConvexBody, shift, tol):
    """``e ⊂ body - shift``."""
    if isinstance(body, Polytope):
        a, b = body.halfspaces
        return bool(np.all(e.support(a) <= b - a @ shift + tol))
    u, _ = sphere_grid(body.dim)
    return bool(np.all(e.support(u) <= body.support(u) - u @ shift + tol))


def _body_in(body: ConvexBody, shift, e: Ellipsoid, tol):
    """``body - shift ⊂ e``."""
    if isinstance(body, Polytope):
        pts = body.vertices - shift
        return bool(np.all(e.gauge(pts) <= 1.0 + tol))
    u, _ = sphere_grid(body.dim)
    return bool(np.all(body.support(u) - u @ shift <= e.support(u) + tol))


def sandwich_check(inp: SandwichInput, tol: float = CONTAINMENT_TOL) -> dict:
    """Test ``E ⊂ K - w ⊂ (1+mu) E`` and the centroid double containment.

    Containment between a polytope and an ellipsoid is decided exactly (facet
    supports and vertex gauges); other bodies are compared through support
    values on the default sphere grid. All comparisons use tolerance ``tol``.
    """
    body, e, w, mu = inp.body, inp.ellipsoid, inp.w, inp.mu
    n = body.dim
    cen = body_measures(body).centroid
    if np.linalg.norm(cen) > CENTROID_TOL * body.diameter_bound():
        raise PreconditionError("precondition violated: centroid of K is not at the origin")
    hyp = _ellipsoid_in(e, body, w, tol) and _body_in(body, w, _scaled(e, 1.0 + mu), tol)
    k = mu * math.sqrt(n + 1)
    inner = 1.0 - k
    zero = np.zeros(n)
    concl = _ellipsoid_in(_scaled(e, inner), body, zero, tol) and _body_in(
        body, zero, _scaled(e, 1.0 + 2.0 * k), tol
    )
    return {"hypothesis_ok": hyp, "conclusion_ok": concl, "inner_scale": inner, "outer_scale": 1.0 + 2.0 * k}


def random_sandwich_instance(rng, n=2, n_vertices=None):
    """Polygon/polytope with vertices on ``(1 + mu) E``, recentered at its centroid.

    Dense vertex sets satisfy the hypothesis, sparse ones usually do not, so
    the corpus exercises both branches.
    """
    mu = rng.uniform(0.02, 0.95) / (n + 1)
    g = rng.standard_normal((n, n))
    lin = np.linalg.qr(g)[0] @ np.diag(rng.uniform(0.5, 2.0, n))
    shape = np.linalg.inv(lin @ lin.T)
    m = n_vertices or int(rng.integers(6, 60 if n == 2 else 200))
    u = rng.standard_normal((m, n))
    u /= np.linalg.norm(u, axis=1, keepdims=True)
    rad = (1.0 + mu) * rng.uniform(1.0 - 0.3 * mu, 1.0, m)
    pts = (u * rad[:, None]) @ lin.T
    poly = Polytope(pts)
    c = body_measures(poly).centroid
    body = Polytope(poly.vertices - c)
    return SandwichInput(body, Ellipsoid(np.zeros(n), shape), -c, mu)
