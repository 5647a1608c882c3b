"""Loewner (minimal enclosing) and John (maximal inscribed) ellipsoids.

Both are affine covariant, which makes the Banach-Mazur estimate derived
from them invariant under invertible linear maps.
"""

from __future__ import annotations

import math
import warnings

import numpy as np

from ..errors import ConvergenceError, DegenerateBodyError, SantaloError
from .bodies import ConvexBody, Ellipsoid, Polytope, RadialBody


def khachiyan(points, tol=1e-12, max_iter=200_000):
    """Minimum-volume enclosing ellipsoid of a point cloud.

    Khachiyan's barycentric coordinate ascent with Todd-Yildirim away steps,
    which converges linearly. Returns an :class:`Ellipsoid` scaled so that
    every point lies inside.
    """
    p = np.asarray(points, dtype=float)
    m, d = p.shape
    q = np.vstack([p.T, np.ones(m)])
    u = np.full(m, 1.0 / m)
    target = d + 1.0
    for _ in range(max_iter):
        mat = (q * u) @ q.T
        g = np.einsum("ij,ji->i", q.T, np.linalg.solve(mat, q))
        j = int(np.argmax(g))
        support = u > 0
        k = int(np.flatnonzero(support)[np.argmin(g[support])])
        up, down = g[j] - target, target - g[k]
        if up <= tol * target and down <= tol * target:
            break
        if up >= down:
            step = up / (target * (g[j] - 1.0))
            u *= 1.0 - step
            u[j] += step
        else:
            step = min(down / (target * (g[k] - 1.0)), u[k] / (1.0 - u[k]))
            u *= 1.0 + step
            u[k] -= step
            u[k] = max(u[k], 0.0)
    else:
        raise ConvergenceError("no convergence in Khachiyan iteration")
    c = p.T @ u
    cov = (p.T * u) @ p - np.outer(c, c)
    a = np.linalg.inv(cov) / d
    diff = p - c
    a /= np.max(np.einsum("ij,jk,ik->i", diff, a, diff))
    return Ellipsoid(c, 0.5 * (a + a.T))


def _sym_from(vec, d):
    m = np.zeros((d, d))
    iu = np.triu_indices(d)
    m[iu] = vec
    return m + np.triu(m, 1).T


def _polish_john(a, b, bmat, c, active, lam0):
    """Newton-type refinement of the KKT system on the active constraints."""
    from scipy.optimize import root

    d = c.size
    iu = np.triu_indices(d)
    aa = a[active]
    bb = b[active]

    def kkt(x):
        k = iu[0].size
        B = _sym_from(x[:k], d)
        cc = x[k : k + d]
        lam = x[k + d :]
        ba = aa @ B  # rows B a_i (B symmetric)
        nrm = np.linalg.norm(ba, axis=1)
        grad_b = np.linalg.inv(B)
        for li, bai, ai, ni in zip(lam, ba, aa, nrm):
            outer = np.outer(bai, ai)
            grad_b = grad_b - li * 0.5 * (outer + outer.T) / ni
        return np.concatenate([grad_b[iu], lam @ aa, nrm + aa @ cc - bb])

    x0 = np.concatenate([bmat[iu], c, lam0])
    sol = root(kkt, x0, method="hybr", options={"xtol": 1e-14})
    k = iu[0].size
    B = _sym_from(sol.x[:k], d)
    cc = sol.x[k : k + d]
    lam = sol.x[k + d :]
    if np.any(lam < 0) or np.linalg.eigvalsh(B).min() <= 0:
        return None
    slack = b - np.linalg.norm(a @ B, axis=1) - a @ cc
    if np.any(slack < -1e-13 * max(1.0, np.abs(b).max())):
        return None
    if np.max(np.abs(kkt(sol.x))) > 1e-11:
        return None
    return B, cc


def john_ellipsoid(body: Polytope):
    """Maximum-volume ellipsoid inscribed in ``{x : A x <= b}``.

    Solved as a log-det conic program and then refined by a root solve of
    the optimality conditions on the active facets.
    """
    import cvxpy as cp

    a, b = body.halfspaces
    d = body.dim
    B = cp.Variable((d, d), PSD=True)
    c = cp.Variable(d)
    cons = [cp.norm(B @ a[i], 2) + a[i] @ c <= b[i] for i in range(a.shape[0])]
    prob = cp.Problem(cp.Maximize(cp.log_det(B)), cons)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        try:
            prob.solve(solver=cp.CLARABEL, tol_gap_abs=1e-10, tol_gap_rel=1e-10, tol_feas=1e-10, max_iter=500)
        except cp.error.SolverError:
            prob.solve(solver=cp.SCS, eps=1e-10, max_iters=200_000)
    if B.value is None:
        raise ConvergenceError("no convergence in inscribed-ellipsoid solve")
    bm = 0.5 * (B.value + B.value.T)
    cv = np.asarray(c.value, dtype=float)
    lam = np.array([float(con.dual_value) for con in cons])
    slack = b - np.linalg.norm(a @ bm, axis=1) - a @ cv
    active = slack < 1e-6 * max(1.0, np.abs(b).max())
    polished = _polish_john(a, b, bm, cv, active, lam[active])
    if polished is not None:
        bm, cv = polished
    binv = np.linalg.inv(bm)
    return Ellipsoid(cv, binv @ binv)


def _polytope_of(body):
    if isinstance(body, Polytope):
        return body
    if isinstance(body, RadialBody):
        return Polytope(body.boundary_points)
    raise SantaloError("bm_ball_upper needs a polytope, radial body or ellipsoid")


def bm_ball_report(body: ConvexBody) -> dict:
    """Both sandwich ratios and the resulting log-scale bound.

    The body is first mapped so that its Loewner ellipsoid is the unit ball;
    the inscribed-ellipsoid program is solved in that well-conditioned frame,
    where every linear image of the body poses the same problem up to a
    rotation.
    """
    if isinstance(body, Ellipsoid):
        return {"log_lambda": 0.0, "lambda_loewner": 1.0, "lambda_john": 1.0}
    poly = _polytope_of(body)
    if poly.dim == 1:
        return {"log_lambda": 0.0, "lambda_loewner": 1.0, "lambda_john": 1.0}
    el = khachiyan(poly.vertices)
    chol = np.linalg.cholesky(el.shape)
    frame = Polytope((poly.vertices - el.center) @ chol)
    a, b = frame.halfspaces
    r = float(np.min(b / np.linalg.norm(a, axis=1)))
    if not r > 0:
        raise DegenerateBodyError("degenerate body")
    ej = john_ellipsoid(frame)
    lam_j = float(np.max(ej.gauge(frame.vertices)))
    lam = min(1.0 / r, lam_j)
    return {"log_lambda": math.log(max(lam, 1.0)), "lambda_loewner": 1.0 / r, "lambda_john": lam_j}


def bm_ball_upper(body: ConvexBody) -> float:
    """Upper bound on the Banach-Mazur distance (log scale) from ``body`` to the ball.

    Returns ``log(min(lam_J, lam_L))`` where ``E_J`` (John) satisfies
    ``E_J ⊂ K ⊂ c_J + lam_J (E_J - c_J)`` and ``E_L`` (Loewner) satisfies
    ``c_L + (E_L - c_L)/lam_L ⊂ K ⊂ E_L``. This is not the exact distance.
    Radial bodies are treated as the polytope spanned by their boundary samples.
    """
    return bm_ball_report(body)["log_lambda"]
