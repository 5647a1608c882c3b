"""JSON specs for bodies, fields, weights and 1D functions; report encoding.

Every spec is a JSON object with a ``"kind"`` key. Non-finite numbers may
be written as the strings ``"inf"``, ``"-inf"`` or ``"nan"``; reports use
the same convention so that they are strict JSON.
"""

from __future__ import annotations

import hashlib
import json
import math
from pathlib import Path

import numpy as np

from .borell import equality_triple, perturbed_triple, profile_m
from .errors import SantaloError
from .geometry.bodies import Ellipsoid, Polytope, RadialBody, ball
from .sphere import sphere_grid
from .stability import family_field
from .transform import UNKNOWN, GridField
from .weights import even_profile, validate_weight

DEFAULT_GRID = {1: 1024, 2: 128, 3: 48, 4: 16}
DEFAULT_TOL = 1e-6


class SpecError(SantaloError):
    """Malformed spec (maps to the parse-error exit status)."""


def _num(v):
    if isinstance(v, str):
        try:
            return float(v)
        except ValueError:
            raise SpecError(f"not a number: {v!r}") from None
    return v


def _array(v, name):
    try:
        return np.asarray(_decode(v), dtype=float)
    except (TypeError, ValueError):
        raise SpecError(f"{name}: expected a numeric array") from None


def _decode(v):
    if isinstance(v, list):
        return [_decode(x) for x in v]
    return _num(v)


def _need(spec, key):
    if key not in spec:
        raise SpecError(f"missing key {key!r} in {spec.get('kind', 'spec')} spec")
    return spec[key]


def load_json(path):
    """Read a JSON file; returns ``(object, sha256 hex digest)``."""
    raw = Path(path).read_bytes()
    try:
        obj = json.loads(raw)
    except json.JSONDecodeError as exc:
        raise SpecError(f"{path}: invalid JSON ({exc.msg})") from None
    return obj, hashlib.sha256(raw).hexdigest()


# ---------------------------------------------------------------------
# bodies
# ---------------------------------------------------------------------


def parse_body(spec):
    kind = _need(spec, "kind")
    if kind == "polytope":
        return Polytope(_array(_need(spec, "vertices"), "vertices"))
    if kind == "ellipsoid":
        return Ellipsoid(_array(_need(spec, "center"), "center"), _array(_need(spec, "shape"), "shape"))
    if kind == "ball":
        dim = int(_need(spec, "dim"))
        center = spec.get("center")
        return ball(dim, None if center is None else _array(center, "center"), float(spec.get("radius", 1.0)))
    if kind == "radial":
        dim = int(_need(spec, "dim"))
        size = spec.get("grid_size")
        size = None if size is None else int(size)
        if "radii" in spec:
            radii = _array(spec["radii"], "radii")
        else:
            u, _ = sphere_grid(dim, size)
            radii = np.full(len(u), float(spec.get("radius", 1.0)))
        ip = spec.get("interior_point")
        return RadialBody(dim, radii, size, None if ip is None else _array(ip, "interior_point"))
    if kind == "regular-polygon":
        m = int(_need(spec, "sides"))
        r = float(spec.get("radius", 1.0))
        t = 2.0 * np.pi * np.arange(m) / m + float(spec.get("phase", 0.0))
        return Polytope(r * np.column_stack([np.cos(t), np.sin(t)]))
    if kind == "cube":
        dim = int(_need(spec, "dim"))
        s = float(spec.get("half_width", 1.0))
        import itertools

        return Polytope(s * np.array(list(itertools.product((-1.0, 1.0), repeat=dim))))
    raise SpecError(f"unknown body kind {kind!r}")


def body_to_dict(body):
    return body.to_dict()


# ---------------------------------------------------------------------
# fields
# ---------------------------------------------------------------------


def _box(spec, dim=None):
    if "box" in spec:
        lo, hi = spec["box"]
        return _array(lo, "box"), _array(hi, "box")
    half = float(spec.get("half_width", 6.0))
    dim = dim or int(_need(spec, "dim"))
    return -half * np.ones(dim), half * np.ones(dim)


def _analytic(spec, dim, grid_override):
    kind = spec["kind"]
    lo, hi = _box(spec, dim)
    n = lo.size
    grid = grid_override or spec.get("grid") or DEFAULT_GRID[n]
    flag = spec.get("convex_flag", UNKNOWN)
    if kind == "quadratic":
        A = _array(spec.get("matrix", np.eye(n).tolist()), "matrix")
        c0 = _array(spec.get("center", [0.0] * n), "center")
        c = float(spec.get("c", 0.0))

        def fun(x):
            d = x - c0
            return 0.5 * np.einsum("...i,ij,...j->...", d, A, d) + c

        return GridField.from_function(fun, lo, hi, grid, flag, np.inf)
    if kind == "norm":
        p = float(spec.get("p", 2.0))

        def fun(x):
            return np.linalg.norm(x, ord=p, axis=-1)

        return GridField.from_function(fun, lo, hi, grid, flag, np.inf)
    if kind == "box-indicator":
        s = float(spec.get("side", 1.0))

        def fun(x):
            return np.where(np.all(np.abs(x) <= s + 1e-12, axis=-1), 0.0, np.inf)

        return GridField.from_function(fun, lo, hi, grid, flag, np.inf)
    if kind == "spike":
        c0 = _array(_need(spec, "spike_center"), "spike_center")
        r0 = float(_need(spec, "spike_radius"))

        def fun(x):
            q = 0.5 * np.sum(x * x, axis=-1)
            return np.where(np.sum((x - c0) ** 2, axis=-1) <= r0 * r0, np.inf, q)

        return GridField.from_function(fun, lo, hi, grid, flag, np.inf)
    if kind == "gaussian-density":
        T = _array(spec.get("matrix", np.eye(n).tolist()), "matrix")
        c0 = _array(spec.get("center", [0.0] * n), "center")
        amp = float(spec.get("amplitude", 1.0))

        def fun(x):
            return amp * np.exp(-np.sum(((x - c0) @ T.T) ** 2, axis=-1))

        return GridField.from_function(fun, lo, hi, grid, flag, 0.0)
    raise SpecError(f"unknown field kind {kind!r}")


def parse_field(spec, grid=None):
    """Field from a spec. ``grid`` overrides the per-axis resolution of analytic kinds."""
    kind = _need(spec, "kind")
    if kind == "grid":
        values = _array(_need(spec, "values"), "values")
        lo, hi = _box(spec, values.ndim)
        outside = float(_num(spec.get("outside", "inf")))
        return GridField(lo, hi, values, spec.get("convex_flag", UNKNOWN), outside)
    if kind == "family":
        n = int(spec.get("dim", 2))
        return family_field(
            _need(spec, "family"), float(_need(spec, "delta")), n, float(spec.get("half_width", 8.0)), grid or spec.get("grid")
        )
    dim = spec.get("dim")
    if dim is None and "box" in spec:
        dim = len(spec["box"][0])
    if dim is None:
        raise SpecError("field spec needs 'dim' or 'box'")
    return _analytic(spec, int(dim), grid)


def field_to_dict(field: GridField):
    return {
        "kind": "grid",
        "box": [field.lo.tolist(), field.hi.tolist()],
        "values": field.values.tolist(),
        "convex_flag": field.convex_flag,
        "outside": field.outside,
    }


# ---------------------------------------------------------------------
# weights, profiles and half-line functions
# ---------------------------------------------------------------------


def parse_weight(spec):
    kind = _need(spec, "kind")
    if kind == "sampled":
        return validate_weight({"kind": "sampled", "t": _array(spec["t"], "t"), "rho": _array(spec["rho"], "rho")})
    return validate_weight(dict(spec))


def parse_profile(spec):
    """Even profile ``omega`` (kinds ``laplace``, ``gaussian``, ``tent`` or ``power``)."""
    kind = _need(spec, "kind")
    if kind == "power":
        p = float(_need(spec, "p"))
        return lambda r: np.exp(-np.power(np.abs(np.asarray(r, dtype=float)), p))
    return even_profile(spec).omega


def parse_h(spec, omega):
    """Perturbation ``h(r) = exp(a + k r - tau |r - c2|) omega(s (r - c))`` of ``omega``."""
    a = float(spec.get("a", 0.0))
    k = float(spec.get("k", 0.0))
    tau = float(spec.get("tau", 0.0))
    c2 = float(spec.get("c2", 0.0))
    c = float(spec.get("c", 0.0))
    s = float(spec.get("s", 1.0))
    if tau < 0 or s <= 0:
        raise SpecError("need tau >= 0 and s > 0")

    def h(r):
        r = np.asarray(r, dtype=float)
        return np.exp(a + k * r - tau * np.abs(r - c2)) * omega(s * (r - c))

    return h


def parse_halfline(spec, base=None):
    """Function on ``[0, inf)`` for the Borell checks."""
    kind = _need(spec, "kind")
    if kind == "profile":
        return profile_m(float(spec.get("k", 1.0)), float(spec.get("c", 1.0)), float(spec.get("p", 1.0)))
    if kind == "scaled":
        m = parse_halfline(_need(spec, "base"))
        _, f, g = equality_triple(m, float(spec.get("a", 1.0)), float(spec.get("b", 1.0)), float(spec.get("u", 0.0)), float(spec.get("v", 0.0)))
        return g if spec.get("role") == "G" else f
    if kind == "perturbed":
        m = parse_halfline(_need(spec, "base"))
        return perturbed_triple(m, float(_need(spec, "delta")))[1]
    if kind == "sampled":
        t = _array(_need(spec, "t"), "t")
        v = _array(_need(spec, "values"), "values")

        def fun(x):
            return np.interp(np.asarray(x, dtype=float), t, v, left=v[0], right=0.0)

        return fun
    if kind == "power-decay":
        q = float(_need(spec, "q"))
        return lambda t: 1.0 / (1.0 + np.asarray(t, dtype=float)) ** q
    raise SpecError(f"unknown half-line function kind {kind!r}")


# ---------------------------------------------------------------------
# report encoding
# ---------------------------------------------------------------------


def _clean(obj):
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _clean(obj.tolist())
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, (np.integer, int)):
        return int(obj)
    if isinstance(obj, (np.floating, float)):
        x = float(obj)
        if math.isfinite(x):
            return x
        return "nan" if math.isnan(x) else ("inf" if x > 0 else "-inf")
    if obj is None or isinstance(obj, str):
        return obj
    if hasattr(obj, "to_dict"):
        return _clean(obj.to_dict())
    return str(obj)


def dumps(report) -> str:
    """Deterministic strict JSON: sorted keys, non-finite floats as strings."""
    return json.dumps(_clean(report), sort_keys=True, indent=2, allow_nan=False) + "\n"


def decode_floats(obj):
    """Inverse of the non-finite encoding used by :func:`dumps`."""
    if isinstance(obj, dict):
        return {k: decode_floats(v) for k, v in obj.items()}
    if isinstance(obj, list):
        return [decode_floats(v) for v in obj]
    if obj in ("inf", "-inf", "nan"):
        return float(obj)
    return obj
