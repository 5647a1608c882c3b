"""Quadrature grids on the unit sphere S^{n-1}, n = 1..4.

Every grid is a pair ``(directions, weights)`` with ``weights.sum()`` equal to
the surface area of the sphere, so that ``sum(w * g(u))`` approximates the
surface integral of ``g``.
"""

from __future__ import annotations

import math
import re
from functools import lru_cache

import numpy as np
from scipy.special import gamma

DEFAULT_SIZES = {1: 2, 2: 512, 3: 2048, 4: 8192}

_NAMED = re.compile(r"^(uniform|fib|gauss|pair)(\d+)$")


def sphere_area(n: int) -> float:
    """Surface area of S^{n-1}, i.e. n * V(B^n)."""
    return 2.0 * math.pi ** (n / 2) / gamma(n / 2)


def ball_volume(n: int) -> float:
    return math.pi ** (n / 2) / gamma(n / 2 + 1)


def _circle(size):
    theta = 2.0 * np.pi * np.arange(size) / size
    u = np.column_stack([np.cos(theta), np.sin(theta)])
    return u, np.full(size, 2.0 * np.pi / size)


def _fibonacci(size):
    i = np.arange(size)
    z = 1.0 - (2.0 * i + 1.0) / size
    r = np.sqrt(1.0 - z * z)
    golden = np.pi * (3.0 - math.sqrt(5.0))
    ang = golden * i
    u = np.column_stack([r * np.cos(ang), r * np.sin(ang), z])
    return u, np.full(size, 4.0 * np.pi / size)


def _gauss_s3(size):
    k = max(2, int(round((size / 2.0) ** (1.0 / 3.0))))
    xg, wg = np.polynomial.legendre.leggauss(k)
    psi = 0.5 * np.pi * (xg + 1.0)
    w_psi = 0.5 * np.pi * wg * np.sin(psi) ** 2
    # Gauss nodes in cos(theta) absorb the sin(theta) density exactly
    ct, w_theta = xg, wg
    st = np.sqrt(1.0 - ct * ct)
    m = 2 * k
    phi = 2.0 * np.pi * np.arange(m) / m
    w_phi = np.full(m, 2.0 * np.pi / m)
    P, C, F = np.meshgrid(psi, np.arange(k), phi, indexing="ij")
    cth = ct[C]
    sth = st[C]
    u = np.stack(
        [
            np.cos(P),
            np.sin(P) * cth,
            np.sin(P) * sth * np.cos(F),
            np.sin(P) * sth * np.sin(F),
        ],
        axis=-1,
    ).reshape(-1, 4)
    w = (w_psi[:, None, None] * w_theta[None, :, None] * w_phi[None, None, :]).ravel()
    return u, w


@lru_cache(maxsize=32)
def _cached(n, size):
    if n == 1:
        u, w = np.array([[1.0], [-1.0]]), np.ones(2)
    elif n == 2:
        u, w = _circle(size)
    elif n == 3:
        u, w = _fibonacci(size)
    elif n == 4:
        u, w = _gauss_s3(size)
    else:
        raise ValueError(f"sphere grids exist for n in 1..4, got {n}")
    u.setflags(write=False)
    w.setflags(write=False)
    return u, w


def sphere_grid(n: int, size: int | None = None):
    """Return ``(directions, weights)`` for the default grid family of S^{n-1}."""
    if size is None:
        size = DEFAULT_SIZES.get(n, 0)
    return _cached(int(n), int(size))


def grid_name(n: int, size: int | None = None) -> str:
    size = DEFAULT_SIZES[n] if size is None else size
    return {1: "pair", 2: "uniform", 3: "fib", 4: "gauss"}[n] + str(size)


def parse_grid_name(name: str):
    """Parse names such as ``"fib2048"`` into ``(n, size)``."""
    m = _NAMED.match(name)
    if not m:
        raise ValueError(f"unknown sphere grid {name!r}")
    kind, size = m.group(1), int(m.group(2))
    n = {"pair": 1, "uniform": 2, "fib": 3, "gauss": 4}[kind]
    return n, size
