"""Santalo point: the interior point minimizing ``z -> V(K^z)``."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import ConvergenceError, SantaloError
from .bodies import ConvexBody, body_measures
from .polar import PolarVolume


@dataclass(frozen=True)
class SantaloResult:
    z: np.ndarray
    product: float
    polar_volume: float
    gradient_norm: float
    iterations: int
    method: str

    def to_dict(self):
        return {
            "z": self.z.tolist(),
            "product": self.product,
            "polar_volume": self.polar_volume,
            "gradient_norm": self.gradient_norm,
            "iterations": self.iterations,
            "method": self.method,
        }


def fd_gradient(fun, z, h):
    g = np.empty_like(z)
    for i in range(z.size):
        e = np.zeros_like(z)
        e[i] = h
        g[i] = (fun(z + e) - fun(z - e)) / (2 * h)
    return g


def fd_hessian(fun, z, h, f0=None):
    n = z.size
    f0 = fun(z) if f0 is None else f0
    H = np.empty((n, n))
    eye = np.eye(n) * h
    for i in range(n):
        H[i, i] = (fun(z + eye[i]) - 2 * f0 + fun(z - eye[i])) / h**2
        for j in range(i):
            v = (
                fun(z + eye[i] + eye[j])
                - fun(z + eye[i] - eye[j])
                - fun(z - eye[i] + eye[j])
                + fun(z - eye[i] - eye[j])
            ) / (4 * h**2)
            H[i, j] = H[j, i] = v
    return H


def _golden(fun, z, axis, lo, hi, tol):
    g = (np.sqrt(5.0) - 1.0) / 2.0

    def at(t):
        p = z.copy()
        p[axis] = t
        return fun(p)

    a, b = lo, hi
    c, d = b - g * (b - a), a + g * (b - a)
    fc, fd = at(c), at(d)
    while b - a > tol:
        if fc < fd:
            b, d, fd = d, c, fc
            c = b - g * (b - a)
            fc = at(c)
        else:
            a, c, fc = c, d, fd
            d = a + g * (b - a)
            fd = at(d)
    return 0.5 * (a + b)


def santalo_point(body: ConvexBody, tol: float = 1e-9, max_iter: int = 100) -> SantaloResult:
    """Minimize ``z -> V(K^z)`` by damped Newton with finite differences.

    Convergence is declared when the scale-free finite-difference gradient
    ``|grad V(K^z)| * s / V(K^z)`` drops below ``tol``, where ``s`` is the
    distance from ``z`` to the boundary (the natural length scale of the
    problem; steps are sized from it too). Falls back to cyclic
    golden-section search along the axes if Newton stalls. The minimizer is
    unique, so any stationary point is accepted.
    """
    if not tol > 0:
        raise SantaloError("tol must be > 0")
    fun = PolarVolume(body)
    diam = body.diameter_bound()
    vol = body_measures(body).volume
    z = body_measures(body).centroid.copy()
    if not np.isfinite(fun(z)):
        z = np.asarray(body.interior_point, dtype=float).copy()

    def local(z):
        s = body.boundary_distance(z)
        f = fun(z)
        g = fd_gradient(fun, z, 1e-5 * s)
        return s, f, g, float(np.linalg.norm(g) * s / f)

    s, f, g, crit = local(z)
    it = 0
    method = "newton"
    stalled = False
    while crit > tol and it < max_iter:
        it += 1
        H = fd_hessian(fun, z, 1e-3 * s, f)
        try:
            step = -np.linalg.solve(H, g)
            if not step @ g < 0:
                raise np.linalg.LinAlgError
        except np.linalg.LinAlgError:
            step = -g * (s * s / f)
        t = 1.0
        new = None
        while t > 1e-14:
            cand = z + t * step
            fc = fun(cand)
            if fc <= f:
                break
            # near the optimum the decrease drops below rounding; judge by the gradient
            if fc <= f * (1.0 + 1e-12) and np.isfinite(fc):
                new = local(cand)
                if new[3] < crit:
                    break
                new = None
            t *= 0.5
        else:
            stalled = True
            break
        z = cand
        s, f, g, crit = new if new is not None else local(z)
    if crit > tol and (stalled or it >= max_iter):
        method = "golden"
        for _ in range(max_iter):
            for ax in range(z.size):
                span = 0.5 * diam
                z[ax] = _golden(fun, z, ax, z[ax] - span, z[ax] + span, 1e-13 * diam)
            s, f, g, crit = local(z)
            it += 1
            if crit <= tol:
                break
        else:
            raise ConvergenceError("no convergence", best=z.copy(), value=vol * f)
    return SantaloResult(z, vol * f, f, float(np.linalg.norm(g)), it, method)
