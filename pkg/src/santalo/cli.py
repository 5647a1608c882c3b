"""Command-line front end: ``santalo <verb> [options]``.

Exit status is 0 on success, 1 on a domain error (the message names the
violated precondition) and 2 on a parse error. Every report echoes input
digests, the seed, the tolerances used and the global defaults.
"""

from __future__ import annotations

import argparse
import csv
import io as _io
import json
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .acceptance import run_suite
from .borell import borell_check, borell_fit
from .errors import SantaloError
from .functional import (
    Convention,
    ball_body,
    fm_center,
    functional_product,
)
from .geometry.bodies import body_measures
from .geometry.ellipsoids import bm_ball_report
from .geometry.polar import PolarVolume, polar_body
from .geometry.sandwich import SandwichInput, random_sandwich_instance, sandwich_check
from .geometry.santalo import santalo_point
from .io import (
    DEFAULT_GRID,
    DEFAULT_TOL,
    SpecError,
    dumps,
    field_to_dict,
    load_json,
    parse_body,
    parse_field,
    parse_h,
    parse_halfline,
    parse_profile,
    parse_weight,
)
from .quad import integrate_grid
from .stability import (
    FAMILIES,
    center_search,
    deficit,
    logconcave_center_check,
    psi_measure,
    stability_fit_functional,
    stability_fit_legendre,
    stability_scan,
)
from .transform import biconjugate, fenchel_young_gap, legendre

VERBS = (
    "polar",
    "volume-product",
    "santalo-point",
    "bm-ball",
    "sandwich-check",
    "legendre",
    "biconjugate",
    "fy-gap",
    "weight-validate",
    "functional-product",
    "ball-body",
    "fm-center",
    "borell-check",
    "borell-fit",
    "stability-fit",
    "psi-measure",
    "prop31-check",
    "scan",
    "selftest",
)

EPILOG = """\
CSV output (--format csv):
  scan          delta,eps,R,l1_primal,l1_dual,l1_legendre,distance,exponent_running
                (one row per scan point, floats in round-trip repr)
  selftest      criterion,title,passed
  other verbs   key,value with nested keys joined by '.'

Exit status: 0 success, 1 domain error, 2 parse error.
Environment: SANTALO_THREADS caps the worker count of scans.
"""


class ParseError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise ParseError(message)


def build_parser():
    p = _Parser(prog="santalo", description="Numerical laboratory for Blaschke-Santalo inequalities.",
                epilog=EPILOG, formatter_class=argparse.RawDescriptionHelpFormatter)
    p.add_argument("--version", action="version", version=f"santalo {__version__}")
    p.add_argument("verb", choices=VERBS)
    p.add_argument("--input", help="main input spec (body, field, weight or sandwich instance)")
    p.add_argument("--output", help="write the report here instead of stdout")
    p.add_argument("--format", choices=("json", "csv"), default="json")
    p.add_argument("--grid", type=int, help="grid points per axis for analytic fields and scans")
    p.add_argument("--tol", type=float, help=f"tolerance (default {DEFAULT_TOL:g})")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--convention", choices=[c.value for c in Convention])
    p.add_argument("--center", help="comma-separated center z")
    p.add_argument("--weight", help="weight spec")
    p.add_argument("--phi", help="potential field spec")
    p.add_argument("--psi", help="dual field spec (fy-gap)")
    p.add_argument("--f", help="density field spec")
    p.add_argument("--g", help="dual density field spec")
    p.add_argument("--M", help="half-line function spec")
    p.add_argument("--F", help="half-line function spec")
    p.add_argument("--G", help="half-line function spec")
    p.add_argument("--h", help="perturbation spec (prop31-check)")
    p.add_argument("--omega", help="even profile spec (prop31-check)")
    p.add_argument("--eps", type=float, help="deficit / hypothesis level")
    p.add_argument("--eta", type=float, help="constant for the exceptional-set bound")
    p.add_argument("--R", help="comma-separated radii (psi-measure)")
    p.add_argument("--n", type=int, default=2, help="dimension (scan, prop31-check)")
    p.add_argument("--family", choices=FAMILIES)
    p.add_argument("--steps", type=int, default=6)
    p.add_argument("--count", type=int, help="random instances (sandwich-check, prop31-check)")
    p.add_argument("--quick", action="store_true", help="selftest: quick subset")
    return p


# ---------------------------------------------------------------------
# helpers
# ---------------------------------------------------------------------


class Context:
    def __init__(self, args):
        self.args = args
        self.digests = {}
        self.settings = {"seed": args.seed}

    def spec(self, path, what):
        if path is None:
            raise ParseError(f"missing --{what}")
        if not Path(path).is_file():
            raise ParseError(f"{what} file not found: {path}")
        obj, digest = load_json(path)
        self.digests[str(path)] = digest
        if not isinstance(obj, dict):
            raise ParseError(f"{path}: expected a JSON object")
        return obj

    def opt(self, name, *alts):
        for key in (name,) + alts:
            val = getattr(self.args, key.lower() if key not in ("M", "F", "G", "R") else key, None)
            if val is not None:
                return val, key
        return None, name

    def field(self, *names):
        path, key = self.opt(*names)
        return parse_field(self.spec(path, key.lower()), self.args.grid)

    def weight(self):
        return parse_weight(self.spec(self.args.weight, "weight"))

    def tol(self, default=DEFAULT_TOL):
        t = self.args.tol if self.args.tol is not None else default
        self.settings["tol"] = t
        return t

    def convention(self, default):
        c = Convention.parse(self.args.convention or default)
        self.settings["convention"] = c.value
        return c

    def center(self, dim):
        if self.args.center is None:
            return None
        try:
            z = np.array([float(v) for v in self.args.center.split(",")])
        except ValueError:
            raise ParseError(f"bad --center {self.args.center!r}") from None
        if z.size != dim:
            raise ParseError(f"--center has {z.size} coordinates, expected {dim}")
        self.settings["center"] = z.tolist()
        return z


def _flatten(obj, prefix=""):
    if isinstance(obj, dict):
        for k in sorted(obj):
            yield from _flatten(obj[k], f"{prefix}{k}.")
    elif isinstance(obj, (list, tuple)) and obj and all(not isinstance(v, (dict, list)) for v in obj):
        yield prefix[:-1], " ".join(repr(v) if isinstance(v, float) else str(v) for v in obj)
    elif isinstance(obj, (list, tuple)):
        for i, v in enumerate(obj):
            yield from _flatten(v, f"{prefix}{i}.")
    else:
        yield prefix[:-1], repr(obj) if isinstance(obj, float) else str(obj)


def _csv(rows, header):
    buf = _io.StringIO()
    wr = csv.writer(buf, lineterminator="\n")
    wr.writerow(header)
    wr.writerows(rows)
    return buf.getvalue()


# ---------------------------------------------------------------------
# verbs
# ---------------------------------------------------------------------


def _body_and_center(ctx):
    body = parse_body(ctx.spec(ctx.args.input, "input"))
    z = ctx.center(body.dim)
    if z is None:
        z = body_measures(body).centroid
        ctx.settings["center"] = "centroid"
    return body, z


def v_polar(ctx):
    body, z = _body_and_center(ctx)
    pol = polar_body(body, z)
    return {"center": z, "polar": pol.to_dict()}


def v_volume_product(ctx):
    body, z = _body_and_center(ctx)
    z = body.check_interior(z)
    v = body_measures(body).volume
    pv = PolarVolume(body)(z)
    return {"center": z, "volume": v, "polar_volume": pv, "product": v * pv}


def v_santalo_point(ctx):
    body = parse_body(ctx.spec(ctx.args.input, "input"))
    return santalo_point(body, tol=ctx.tol(1e-9)).to_dict()


def v_bm_ball(ctx):
    body = parse_body(ctx.spec(ctx.args.input, "input"))
    return bm_ball_report(body)


def v_sandwich_check(ctx):
    tol = ctx.tol(1e-9)
    if ctx.args.count:
        rng = np.random.Generator(np.random.Philox(ctx.args.seed))
        rows = [sandwich_check(random_sandwich_instance(rng, ctx.args.n), tol) for _ in range(ctx.args.count)]
        bad = sum(r["hypothesis_ok"] and not r["conclusion_ok"] for r in rows)
        return {"instances": len(rows), "hypothesis_ok": sum(r["hypothesis_ok"] for r in rows),
                "counterexamples": bad}
    spec = ctx.spec(ctx.args.input, "input")
    try:
        inp = SandwichInput(parse_body(spec["body"]), parse_body(spec["ellipsoid"]),
                            np.asarray(spec.get("w", [0.0] * len(spec["ellipsoid"]["center"])), dtype=float),
                            float(spec["mu"]))
    except KeyError as exc:
        raise SpecError(f"sandwich spec needs key {exc}") from None
    return sandwich_check(inp, tol)


def _field_report(fld):
    return {"field": field_to_dict(fld)}


def v_legendre(ctx):
    phi = ctx.field("phi", "input")
    return _field_report(legendre(phi, ctx.center(phi.dim)))


def v_biconjugate(ctx):
    phi = ctx.field("phi", "input")
    return _field_report(biconjugate(phi, ctx.center(phi.dim)))


def v_fy_gap(ctx):
    phi = ctx.field("phi", "input")
    z = ctx.center(phi.dim)
    psi = ctx.field("psi") if ctx.args.psi else legendre(phi, z)
    return {"min_gap": fenchel_young_gap(phi, psi, z)}


def v_weight_validate(ctx):
    path, key = ctx.opt("weight", "input")
    return {"weight": parse_weight(ctx.spec(path, key)).to_dict()}


def v_functional_product(ctx):
    w = ctx.weight()
    phi = ctx.field("phi", "input")
    conv = ctx.convention("half-square")
    rep = functional_product(w, phi, ctx.center(phi.dim), conv)
    out = rep.to_dict()
    out["deficit"] = deficit(rep)
    return out


def v_ball_body(ctx):
    f = ctx.field("f", "input")
    z = ctx.center(f.dim)
    k = ball_body(f, z)
    m = body_measures(k)
    total = integrate_grid(f)
    return {"body": k.to_dict(), "volume": m.volume, "centroid": m.centroid, "integral": total,
            "identity_error": abs(total - f.dim * m.volume) / total}


def v_fm_center(ctx):
    f = ctx.field("f", "input")
    res = fm_center(f, tol=ctx.tol(1e-8))
    return {"center": res.z, "centroid_norm": res.centroid_norm, "iterations": res.iterations}


def _triple(ctx):
    return [parse_halfline(ctx.spec(getattr(ctx.args, k), k)) for k in ("M", "F", "G")]


def v_borell_check(ctx):
    return borell_check(*_triple(ctx), tol=ctx.tol(1e-9)).to_dict()


def v_borell_fit(ctx):
    return borell_fit(*_triple(ctx)).to_dict()


def v_stability_fit(ctx):
    w = ctx.weight()
    tol = ctx.tol()
    if ctx.args.phi or (ctx.args.input and not ctx.args.f):
        phi = ctx.field("phi", "input")
        return stability_fit_legendre(w, phi, tol=tol, seed=ctx.args.seed, z_center=ctx.center(phi.dim)).to_dict()
    f = ctx.field("f")
    g = ctx.field("g")
    conv = ctx.convention("square")
    return stability_fit_functional(w, f, g, ctx.center(f.dim), conv, tol=tol, seed=ctx.args.seed).to_dict()


def v_psi_measure(ctx):
    w = ctx.weight()
    phi = ctx.field("phi", "input")
    if ctx.args.eps is None:
        raise ParseError("missing --eps")
    radii = (1.0,)
    if ctx.args.R:
        try:
            radii = tuple(float(v) for v in ctx.args.R.split(","))
        except ValueError:
            raise ParseError(f"bad --R {ctx.args.R!r}") from None
    return psi_measure(phi, w, ctx.args.eps, R_list=radii, z=ctx.center(phi.dim), eta=ctx.args.eta)


def v_prop31_check(ctx):
    if ctx.args.count:
        return center_search(count=ctx.args.count, seed=ctx.args.seed)
    omega = parse_profile(ctx.spec(ctx.args.omega, "omega"))
    hspec = ctx.spec(ctx.args.h, "h")
    h = parse_h(hspec, omega) if hspec.get("kind") == "perturbation" else parse_profile(hspec)
    if ctx.args.eps is None:
        raise ParseError("missing --eps")
    return logconcave_center_check(h, omega, ctx.args.n, ctx.args.eps).to_dict()


def v_scan(ctx):
    if ctx.args.family is None:
        raise ParseError("missing --family")
    w = ctx.weight() if ctx.args.weight else None
    return stability_scan(ctx.args.family, n=ctx.args.n, steps=ctx.args.steps, w=w, grid=ctx.args.grid)


DISPATCH = {
    "polar": v_polar,
    "volume-product": v_volume_product,
    "santalo-point": v_santalo_point,
    "bm-ball": v_bm_ball,
    "sandwich-check": v_sandwich_check,
    "legendre": v_legendre,
    "biconjugate": v_biconjugate,
    "fy-gap": v_fy_gap,
    "weight-validate": v_weight_validate,
    "functional-product": v_functional_product,
    "ball-body": v_ball_body,
    "fm-center": v_fm_center,
    "borell-check": v_borell_check,
    "borell-fit": v_borell_fit,
    "stability-fit": v_stability_fit,
    "psi-measure": v_psi_measure,
    "prop31-check": v_prop31_check,
    "scan": v_scan,
}


def _envelope(ctx, verb, result):
    return {
        "command": verb,
        "version": __version__,
        "inputs": dict(sorted(ctx.digests.items())),
        "settings": ctx.settings,
        "defaults": {"grid": {str(k): v for k, v in DEFAULT_GRID.items()}, "tol": DEFAULT_TOL},
        "result": result,
    }


def _selftest(ctx, out):
    if ctx.args.weight:
        ctx.weight()
    suite = run_suite(quick=ctx.args.quick, echo=lambda line: print(line, file=sys.stderr))
    print(suite.table().splitlines()[-1], file=sys.stderr)
    if ctx.args.format == "csv":
        text = _csv([(r.number, r.title, r.passed) for r in suite.results], ("criterion", "title", "passed"))
    else:
        text = dumps(_envelope(ctx, "selftest", suite.report()))
    out(text)
    if not suite.passed:
        names = ", ".join(f"{r.number} ({r.title})" for r in suite.failing())
        print(f"santalo: selftest failed: {names}", file=sys.stderr)
        return 1
    return 0


def main(argv=None):
    try:
        args = build_parser().parse_args(argv)
    except ParseError as exc:
        print(f"santalo: error: {exc}", file=sys.stderr)
        return 2
    ctx = Context(args)
    if args.grid is not None:
        ctx.settings["grid"] = args.grid

    def out(text):
        if args.output:
            Path(args.output).write_text(text)
        else:
            sys.stdout.write(text)

    try:
        if args.verb == "selftest":
            return _selftest(ctx, out)
        result = DISPATCH[args.verb](ctx)
        if args.format == "csv":
            if args.verb == "scan":
                text = result.to_csv()
            else:
                payload = result.to_dict() if hasattr(result, "to_dict") else result
                text = _csv(list(_flatten(json.loads(dumps(payload)))), ("key", "value"))
        else:
            text = dumps(_envelope(ctx, args.verb, result))
        out(text)
        return 0
    except (ParseError, SpecError) as exc:
        print(f"santalo: parse error: {exc}", file=sys.stderr)
        return 2
    except SantaloError as exc:
        print(f"santalo: {exc}", file=sys.stderr)
        return 1
    except (KeyError, TypeError, ValueError) as exc:
        print(f"santalo: parse error: malformed input ({type(exc).__name__}: {exc})", file=sys.stderr)
        return 2


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
