"""Embedded acceptance suite.

Each criterion is a function ``(quick) -> dict`` returning its measured
values and a ``passed`` flag. :func:`run_suite` times them, and the last
criterion checks the suite's own runtime and determinism. Reports never
contain wall-clock times unless asked for, so that reruns with a fixed seed
are byte-identical.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field

import numpy as np

from .borell import borell_check, borell_fit, equality_triple, perturbed_triple, profile_m
from .functional import (
    Convention,
    ball_body,
    functional_product,
    polar_inclusion_check,
    product_hypothesis_check,
)
from .geometry.bodies import Polytope, RadialBody, body_measures
from .geometry.polar import polar_body, volume_product
from .geometry.sandwich import random_sandwich_instance, sandwich_check
from .geometry.santalo import santalo_point
from .io import dumps
from .sphere import ball_volume
from .stability import (
    center_search,
    psi_measure,
    stability_fit_functional,
    stability_fit_legendre,
    stability_scan,
)
from .transform import (
    CONVEX,
    GridField,
    conjugate_1d_bruteforce,
    conjugate_rows,
    fenchel_young_gap,
    legendre,
)
from .weights import validate_weight

SEED = 20240611
FULL_BUDGET = 120.0
QUICK_BUDGET = 15.0
QUICK = (1, 2, 3, 4, 5, 6, 7, 8, 9, 10, 13)
TITLES = {
    1: "polar involution",
    2: "exact volume products",
    3: "Santalo point of triangles",
    4: "Legendre self-duality",
    5: "Fenchel-Young inequality",
    6: "functional product at the Gaussian",
    7: "Ball's body identity and polar inclusion",
    8: "Borell suite",
    9: "one-dimensional center search",
    10: "sandwich implication",
    11: "stability fits on the equality manifold",
    12: "scan sanity",
    13: "exceptional set measurement",
    14: "runtime and determinism",
}


def _rng(k):
    return np.random.Generator(np.random.Philox(key=SEED + k))


def _hausdorff(a, b):
    d = np.linalg.norm(a[:, None, :] - b[None, :, :], axis=-1)
    return float(max(d.min(axis=1).max(), d.min(axis=0).max()))


def _random_polytope(rng, n, m):
    while True:
        pts = rng.standard_normal((m, n))
        try:
            return Polytope(pts)
        except ValueError:
            continue


# ---------------------------------------------------------------------
# criteria
# ---------------------------------------------------------------------


def c01_polar_involution(quick=False):
    rng = _rng(1)
    worst = 0.0
    counts = {2: 30 if quick else 100, 3: 6 if quick else 20}
    for n, count in counts.items():
        for _ in range(count):
            k = _random_polytope(rng, n, int(rng.integers(n + 2, 14 if n == 2 else 18)))
            z = body_measures(k).centroid
            kk = polar_body(polar_body(k, z), z)
            worst = max(worst, _hausdorff(k.vertices, kk.vertices))
    return {"bodies": counts, "max_hausdorff": worst, "passed": worst < 1e-9}


def c02_volume_products(quick=False):
    square = Polytope([[-1, -1], [1, -1], [1, 1], [-1, 1]])
    s = np.sqrt(3.0)
    tri = Polytope([[-1.0, -1.0 / s], [1.0, -1.0 / s], [0.0, 2.0 / s]])
    disk = RadialBody(2, np.ones(512), 512)
    ps = santalo_point(square).product
    pt = santalo_point(tri).product
    pd = volume_product(disk, np.zeros(2))
    pi2 = math.pi**2
    ok = (
        abs(ps - 8.0) < 1e-9
        and abs(pt - 6.75) < 1e-9
        and abs(pd - pi2) < 1e-4
        and ps < pi2 - 1e-3
        and pt < pi2 - 1e-3
        and pd <= pi2 + 1e-12
    )
    return {"square": ps, "triangle": pt, "disk": pd, "ball_bound": pi2, "passed": bool(ok)}


def _polar_triangle_area(a, b, z):
    """Area of the polar at each row of ``z`` of the triangle ``{A x <= b}``.

    The polar is the triangle with vertices ``a_i / (b_i - <a_i, z>)``;
    rows of ``z`` outside the triangle get ``+inf``.
    """
    slack = b[None, :] - z @ a.T
    v = a[None, :, :] / slack[..., None]
    e1, e2 = v[:, 1] - v[:, 0], v[:, 2] - v[:, 0]
    area = 0.5 * np.abs(e1[:, 0] * e2[:, 1] - e1[:, 1] * e2[:, 0])
    return np.where(np.all(slack > 0, axis=1), area, np.inf)


def _grid_search_min(fun, center, span, levels=14, m=41):
    """Nested grid search: the best node of an ``m x m`` grid becomes the next center."""
    z = np.asarray(center, dtype=float)
    t = np.linspace(-1.0, 1.0, m)
    offsets = np.stack(np.meshgrid(t, t, indexing="ij"), axis=-1).reshape(-1, 2)
    for _ in range(levels):
        cand = z + span * offsets
        z = cand[int(np.argmin(fun(cand)))]
        span *= 4.0 / (m - 1)
    return z


def c03_santalo_triangles(quick=False):
    rng = _rng(3)
    count = 15 if quick else 50
    worst_c = worst_o = 0.0
    for _ in range(count):
        while True:
            pts = rng.uniform(-1.0, 1.0, (3, 2))
            area = 0.5 * abs(np.linalg.det(np.vstack([pts[1] - pts[0], pts[2] - pts[0]])))
            if area > 0.1:
                break
        tri = Polytope(pts)
        a, b = tri.halfspaces
        cen = pts.mean(axis=0)
        res = santalo_point(tri)
        oracle = _grid_search_min(lambda z: _polar_triangle_area(a, b, z), cen, 0.25)
        worst_c = max(worst_c, float(np.linalg.norm(res.z - cen)))
        worst_o = max(worst_o, float(np.linalg.norm(oracle - cen)))
    return {"triangles": count, "max_dist_to_centroid": worst_c, "oracle_max_dist": worst_o,
            "passed": worst_c < 1e-6 and worst_o < 1e-6}


def c04_self_duality(quick=False):
    phi = GridField.from_function(lambda x: 0.5 * np.sum(x * x, axis=-1), [-4, -4], [4, 4], 129)
    psi = legendre(phi)
    y = psi.points()
    inner = np.all(np.abs(y) <= 2.0 + 1e-12, axis=-1)
    err_q = float(np.max(np.abs(psi.values - 0.5 * np.sum(y * y, axis=-1))[inner]))
    cube = GridField.from_function(
        lambda x: np.where(np.all(np.abs(x) <= 1.0 + 1e-12, axis=-1), 0.0, np.inf), [-2, -2], [2, 2], 129
    )
    psic = legendre(cube, dual=([-3, -3], [3, 3]))
    yc = psic.points()
    err_c = float(np.max(np.abs(psic.values - np.abs(yc).sum(axis=-1))))
    step = float(cube.steps.max())
    rng = _rng(4)
    count = 50 if quick else 200
    mismatches = 0
    for _ in range(count):
        m = int(rng.integers(4, 300))
        x = np.sort(rng.uniform(-5, 5, m))
        x = np.unique(x)
        f = rng.standard_normal(x.size) * rng.uniform(0.1, 5) + rng.uniform(0, 2) * x**2
        f[rng.random(x.size) < 0.1] = np.inf
        if not np.isfinite(f).any():
            f[0] = 0.0
        y = np.sort(rng.uniform(-20, 20, int(rng.integers(4, 300))))
        fast = conjugate_rows(x, f[None, :], y)[0]
        brute = conjugate_1d_bruteforce(x, f, y)
        mismatches += int(not np.array_equal(fast, brute))
    ok = err_q < 0.01 and err_c < 2.0 * step and mismatches == 0
    return {"quadratic_sup_error": err_q, "cube_sup_error": err_c, "grid_step": step,
            "fields_1d": count, "fast_vs_bruteforce_mismatches": mismatches, "passed": bool(ok)}


def _random_convex_field(rng, n):
    m = 33 if n == 2 else 129
    lo, hi = -3.0 * np.ones(n), 3.0 * np.ones(n)
    g = rng.standard_normal((n, n))
    A = g @ g.T * rng.uniform(0, 1) + rng.uniform(0, 0.5) * np.eye(n)
    planes = rng.standard_normal((int(rng.integers(1, 5)), n))
    offs = rng.standard_normal(planes.shape[0])
    lam = rng.uniform(0, 2)

    def fun(x):
        q = 0.5 * np.einsum("...i,ij,...j->...", x, A, x)
        aff = np.max(x @ planes.T + offs, axis=-1)
        return q + lam * aff

    vals = fun(GridField.from_function(lambda x: x[..., 0], lo, hi, m).points())
    if rng.random() < 0.3:
        cut = rng.uniform(1.0, 2.5)
        r = np.linalg.norm(GridField.from_function(lambda x: x[..., 0], lo, hi, m).points(), axis=-1)
        vals = np.where(r <= cut, vals, np.inf)
    return GridField(lo, hi, vals)


def c05_fenchel_young(quick=False):
    rng = _rng(5)
    count = 30 if quick else 100
    worst = math.inf
    for i in range(count):
        phi = _random_convex_field(rng, 2 if i % 4 else 1)
        z = rng.uniform(-0.5, 0.5, phi.dim)
        psi = legendre(phi, z)
        worst = min(worst, fenchel_young_gap(phi, psi, z))
    return {"fields": count, "min_gap": worst, "passed": worst >= -1e-9}


def c06_gaussian_product(quick=False):
    w = validate_weight({"kind": "exp", "rate": 1.0})
    target = (2.0 * math.pi) ** 2
    rows = []
    for m in (64, 128, 256):
        phi = GridField.from_function(lambda x: 0.5 * np.sum(x * x, axis=-1), [-6, -6], [6, 6], m)
        # default dual box: the transform is inexact, so the raw deficit measures discretization error
        rep = functional_product(w, phi, convention=Convention.HALF_SQUARE)
        rows.append({"grid": m, "product": rep.product, "deficit": abs(rep.deficit_minus)})
    p128 = rows[1]
    rel = abs(p128["product"] - target) / target
    defs = [r["deficit"] for r in rows]
    ok = rel < 5e-3 and p128["deficit"] < 1e-3 and defs[0] > defs[1] > defs[2]
    return {"reference": target, "rows": rows, "relative_error_128": rel, "passed": bool(ok)}


def _random_logconcave(rng, n):
    """``amp exp(-|T (x - c)|^p)`` and its closed-form integral."""
    g = rng.standard_normal((n, n))
    T = np.linalg.qr(g)[0] @ np.diag(rng.uniform(0.8, 1.6, n))
    c = rng.uniform(-0.3, 0.3, n)
    p = rng.uniform(1.0, 2.0)
    amp = rng.uniform(0.5, 2.0)

    def fun(x):
        return amp * np.exp(-np.sum(((x - c) @ T.T) ** 2, axis=-1) ** (0.5 * p))

    total = amp * n * ball_volume(n) * math.gamma(n / p) / (p * abs(np.linalg.det(T)))
    return fun, c, total


def c07_ball_body(quick=False):
    rng = _rng(7)
    count = 8 if quick else 20
    worst = 0.0
    for i in range(count):
        n = 2 if i % 2 == 0 else 3
        fun, c, total = _random_logconcave(rng, n)
        half = 20.0
        f = GridField.from_function(fun, -half * np.ones(n), half * np.ones(n), 41, outside=0.0)
        k = ball_body(f, c)
        worst = max(worst, abs(total - n * body_measures(k).volume) / total)
    w = validate_weight({"kind": "exp", "rate": 1.0})
    margins = []
    hyp = []
    for scale_g, t0 in ((1.0, (2.0, 0.5)), (0.5, (1.5, 1.0)), (1.0, (1.0, 1.0)), (0.8, (1.3, 0.7))):
        T0 = np.diag(t0)
        Ti = np.linalg.inv(T0)
        f = GridField.from_function(lambda x: np.exp(-np.sum((x @ T0.T) ** 2, axis=-1)),
                                    [-8, -8], [8, 8], 129, outside=0.0)
        g = GridField.from_function(lambda x: scale_g * np.exp(-np.sum((x @ Ti.T) ** 2, axis=-1)),
                                    [-8, -8], [8, 8], 129, outside=0.0)
        hyp.append(product_hypothesis_check(w, f, g, convention=Convention.SQUARE))
        margins.append(polar_inclusion_check(f, g, w=w))
    ok = worst < 1e-3 and all(h >= -1e-9 for h in hyp) and max(margins) <= 1e-6
    return {"functions": count, "max_relative_error": worst, "hypothesis_margins": hyp,
            "inclusion_margins": margins, "passed": bool(ok)}


def c08_borell(quick=False):
    rng = _rng(8)
    count = 150 if quick else 1000
    worst = 0.0
    for i in range(count):
        m = profile_m(rng.uniform(0, 3), rng.uniform(0.3, 3), rng.uniform(0.5, 3))
        if i % 3 == 2:
            M, F, G = perturbed_triple(m, rng.uniform(0, 1))
        else:
            u, v = (rng.uniform(0, 1, 2) * (rng.random(2) < 0.5))
            M, F, G = equality_triple(m, math.exp(rng.uniform(-1.5, 1.5)), math.exp(rng.uniform(-1.5, 1.5)), u, v)
        rep = borell_check(M, F, G)
        if rep.hypothesis_margin >= -1e-9:
            worst = max(worst, rep.ratio)
    fits = []
    for a, b, k in ((2.0, 0.5, 1.0), (0.7, 3.0, 2.0), (1.3, 1.7, 0.5)):
        M, F, G = equality_triple(profile_m(k, 1.0, 1.5), a, b)
        r = borell_fit(M, F, G)
        # F = a M(b .) is fitted as M = a' F(b' .), so a' = 1/a and b' = 1/b
        fits.append({"a": a, "b": b, "fit_a": 1.0 / r.fit_a, "fit_b": 1.0 / r.fit_b, "l1": max(r.l1_f, r.l1_g)})
    fit_ok = all(abs(f["fit_a"] - f["a"]) < 1e-3 and abs(f["fit_b"] - f["b"]) < 1e-3 and f["l1"] < 1e-3
                 for f in fits)
    sweep = []
    m = profile_m(1.0, 1.0, 1.0)
    for d in (0.4, 0.2, 0.1, 0.05, 0.025):
        M, F, G = perturbed_triple(m, d)
        r = borell_fit(M, F, G, restarts=1)
        sweep.append({"delta": d, "ratio": r.ratio, "l1": r.l1_f})
    ratios = [s["ratio"] for s in sweep]
    l1s = [s["l1"] for s in sweep]
    sweep_ok = bool(np.all(np.diff(ratios) > 0) and np.all(np.diff(l1s) < 0) and ratios[-1] < 1 and l1s[-1] < 0.05)
    ok = worst <= 1.0 + 1e-9 and fit_ok and sweep_ok
    return {"triples": count, "max_ratio": worst, "fits": fits, "sweep": sweep, "passed": bool(ok)}


def c09_center_search(quick=False):
    count = 1000 if quick else 10_000
    t = time.perf_counter()
    res = center_search(count=count, seed=SEED)
    elapsed = time.perf_counter() - t
    return {"pairs": res["pairs"], "violations": res["violations"], "worst_ratio": res["worst_ratio"],
            "in_proven_range": res["in_proven_range"], "passed": res["violations"] == 0 and elapsed < 30.0,
            "_seconds": elapsed}


def c10_sandwich(quick=False):
    rng = _rng(10)
    count = 30 if quick else 100
    hyp = counter = 0
    for i in range(count):
        inp = random_sandwich_instance(rng, 2 if i % 3 else 3)
        rep = sandwich_check(inp)
        hyp += int(rep["hypothesis_ok"])
        counter += int(rep["hypothesis_ok"] and not rep["conclusion_ok"])
    return {"instances": count, "hypothesis_ok": hyp, "counterexamples": counter,
            "passed": counter == 0 and hyp > 0}


def _sqrtm(a):
    lam, v = np.linalg.eigh(a)
    return (v * np.sqrt(lam)) @ v.T


def c11_fits(quick=False):
    w = validate_weight({"kind": "exp", "rate": 1.0})
    tol = 1e-6
    A = np.array([[2.0, 0.3], [0.3, 0.7]])
    phi = GridField.from_function(lambda x: 0.5 * np.einsum("...i,ij,...j->...", x, A, x),
                                  [-6, -6], [6, 6], 128, CONVEX)
    fl = stability_fit_legendre(w, phi, tol=tol, restarts=1)
    err_l = float(np.linalg.norm(fl.T - _sqrtm(A), 2))
    T0 = np.diag([2.0, 0.5])
    Ti = np.linalg.inv(T0)
    f = GridField.from_function(lambda x: np.exp(-np.sum((x @ T0.T) ** 2, axis=-1)), [-8, -8], [8, 8], 161,
                                outside=0.0, exact=False)
    g = GridField.from_function(lambda x: np.exp(-np.sum((x @ Ti.T) ** 2, axis=-1)), [-8, -8], [8, 8], 161,
                                outside=0.0, exact=False)
    ff = stability_fit_functional(w, f, g, z=np.zeros(2), tol=tol)
    err_f = float(np.linalg.norm(ff.T - T0, 2))
    ok = err_l < 1e-3 and fl.l1_primal < 10 * tol and err_f < 1e-3 and abs(ff.xi - 1.0) < 1e-3
    return {"legendre": {"T_error": err_l, "l1_primal": fl.l1_primal, "c": fl.c},
            "functional": {"T_error": err_f, "xi": ff.xi, "l1_primal": ff.l1_primal, "l1_dual": ff.l1_dual},
            "passed": bool(ok)}


def c12_scans(quick=False):
    t = time.perf_counter()
    out = {}
    ok = True
    for fam in ("truncated-quadratic", "bump"):
        sc = stability_scan(fam, n=2, steps=6)
        eps = [p.eps for p in sc.points]
        dist = [p.distance for p in sc.points]
        good = (sc.monotone_eps and sc.monotone_distance and sc.fitted_exponent > 0
                and sc.calibrated_bound_ok and min(eps) > 0)
        ok = ok and good
        out[fam] = {"eps": eps, "distance": dist, "exponent": sc.fitted_exponent,
                    "calibrated_constant": sc.calibrated_constant, "passed": bool(good)}
    elapsed = time.perf_counter() - t
    out["passed"] = bool(ok and elapsed < 60.0)
    out["_seconds"] = elapsed
    return out


def c13_psi(quick=False):
    w = validate_weight({"kind": "exp", "rate": 1.0})
    c0, r0 = np.array([1.0, 0.0]), 0.3

    def spike(x):
        q = 0.5 * np.sum(x * x, axis=-1)
        return np.where(np.sum((x - c0) ** 2, axis=-1) <= r0 * r0, np.inf, q)

    phi = GridField.from_function(spike, [-4, -4], [4, 4], 257)
    R_list = (1.5, 2.0, 3.0)
    tab = psi_measure(phi, w, 1e-6, R_list=R_list)["table"]
    target = math.pi * r0 * r0
    rel = max(abs(v - target) / target for _, v in tab)
    quad = GridField.from_function(lambda x: 0.5 * np.sum(x * x, axis=-1), [-4, -4], [4, 4], 129, CONVEX)
    box = GridField.from_function(
        lambda x: np.where(np.all(np.abs(x) <= 1.0, axis=-1), np.sum(np.abs(x), axis=-1), np.inf),
        [-2, -2], [2, 2], 129)
    empty = [v for fld in (quad, box) for _, v in psi_measure(fld, w, 1e-6, R_list=R_list)["table"]]
    ok = rel < 0.1 and all(v == 0.0 for v in empty)
    return {"spike_volume": tab, "target": target, "max_relative_error": rel,
            "convex_volumes": empty, "passed": bool(ok)}


CRITERIA = {
    1: c01_polar_involution,
    2: c02_volume_products,
    3: c03_santalo_triangles,
    4: c04_self_duality,
    5: c05_fenchel_young,
    6: c06_gaussian_product,
    7: c07_ball_body,
    8: c08_borell,
    9: c09_center_search,
    10: c10_sandwich,
    11: c11_fits,
    12: c12_scans,
    13: c13_psi,
}


# ---------------------------------------------------------------------
# runner
# ---------------------------------------------------------------------


@dataclass
class CriterionResult:
    number: int
    title: str
    passed: bool
    details: dict
    seconds: float
    error: str | None = None

    def to_dict(self, timing=False):
        d = {"criterion": self.number, "title": self.title, "passed": self.passed,
             "details": {k: v for k, v in self.details.items() if not k.startswith("_")}}
        if self.error:
            d["error"] = self.error
        if timing:
            d["seconds"] = self.seconds
        return d

    def line(self):
        mark = "PASS" if self.passed else "FAIL"
        extra = f" ({self.error})" if self.error else ""
        return f"[{mark}] {self.number:2d}. {self.title} ({self.seconds:.1f} s){extra}"


@dataclass
class SuiteResult:
    quick: bool
    results: list = field(default_factory=list)

    @property
    def passed(self):
        return all(r.passed for r in self.results)

    @property
    def seconds(self):
        return sum(r.seconds for r in self.results)

    def failing(self):
        return [r for r in self.results if not r.passed]

    def report(self, timing=False):
        return {"suite": "quick" if self.quick else "full", "seed": SEED, "passed": self.passed,
                "criteria": [r.to_dict(timing) for r in self.results]}

    def table(self):
        lines = [r.line() for r in self.results]
        status = "all criteria pass" if self.passed else "FAILED: " + ", ".join(
            f"{r.number} ({r.title})" for r in self.failing())
        lines.append(f"{status}; {self.seconds:.1f} s")
        return "\n".join(lines)


def run_criterion(number, quick=False, echo=None):
    fun = CRITERIA[number]
    t = time.perf_counter()
    try:
        details = fun(quick)
        error = None
    except Exception as exc:  # a crash is reported as a failure
        details, error = {"passed": False}, f"{type(exc).__name__}: {exc}"
    res = CriterionResult(number, TITLES[number], bool(details.get("passed")), details,
                          time.perf_counter() - t, error)
    if echo:
        echo(res.line())
    return res


def run_suite(quick=False, only=None, echo=None) -> SuiteResult:
    """Run the criteria (all of them, the quick subset, or ``only``).

    In a full run, criterion 14 re-runs the quick subset twice, checks that
    the two reports are byte-identical and that both the quick and the full
    suite stay within their time budgets.
    """
    numbers = sorted(only) if only else (QUICK if quick else tuple(range(1, 15)))
    suite = SuiteResult(quick)
    for k in numbers:
        if k == 14:
            continue
        suite.results.append(run_criterion(k, quick, echo))
    if 14 in numbers:
        t = time.perf_counter()
        main = suite.seconds
        a = run_suite(quick=True)
        b_text = dumps(run_suite(quick=True).report())
        same = dumps(a.report()) == b_text
        full = main + (time.perf_counter() - t)
        ok = same and a.passed and a.seconds < QUICK_BUDGET and full < FULL_BUDGET
        details = {"byte_identical": same, "quick_passed": a.passed, "quick_within_budget": a.seconds < QUICK_BUDGET,
                   "full_within_budget": full < FULL_BUDGET, "passed": ok,
                   "_quick_seconds": a.seconds, "_full_seconds": full}
        res = CriterionResult(14, TITLES[14], ok, details, time.perf_counter() - t)
        if echo:
            echo(res.line() + f" [quick suite {a.seconds:.1f} s, full suite {full:.1f} s]")
        suite.results.append(res)
    return suite
