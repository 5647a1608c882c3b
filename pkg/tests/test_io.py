import json
import math

import numpy as np
import pytest

from santalo.geometry import Ellipsoid, Polytope, RadialBody, body_measures
from santalo.io import (
    SpecError,
    decode_floats,
    dumps,
    field_to_dict,
    load_json,
    parse_body,
    parse_field,
    parse_halfline,
    parse_weight,
)


def test_body_kinds():
    assert isinstance(parse_body({"kind": "polytope", "vertices": [[0, 0], [1, 0], [0, 1]]}), Polytope)
    e = parse_body({"kind": "ellipsoid", "center": [0, 0], "shape": [[1, 0], [0, 4]]})
    assert isinstance(e, Ellipsoid)
    disk = parse_body({"kind": "radial", "dim": 2, "radius": 1.0, "grid_size": 512})
    assert isinstance(disk, RadialBody) and abs(body_measures(disk).volume - math.pi) < 1e-4
    assert body_measures(parse_body({"kind": "cube", "dim": 3})).volume == pytest.approx(8.0)
    hexagon = parse_body({"kind": "regular-polygon", "sides": 6})
    assert body_measures(hexagon).volume == pytest.approx(3 * math.sqrt(3) / 2)


def test_body_round_trip():
    for body in (parse_body({"kind": "polytope", "vertices": [[0, 0], [2, 0], [0, 1]]}),
                 parse_body({"kind": "ellipsoid", "center": [1, 0], "shape": [[2, 0], [0, 1]]})):
        again = parse_body(json.loads(dumps(body.to_dict())))
        assert body_measures(again).volume == pytest.approx(body_measures(body).volume, rel=1e-15)


def test_field_round_trip_with_infinities():
    f = parse_field({"kind": "spike", "dim": 2, "half_width": 2.0, "grid": 9, "spike_center": [0, 0], "spike_radius": 0.3})
    assert np.isinf(f.values).any()
    text = dumps(field_to_dict(f))
    assert "Infinity" not in text
    g = parse_field(json.loads(text))
    assert np.array_equal(f.values, g.values) and np.array_equal(f.lo, g.lo)


def test_grid_override():
    spec = {"kind": "quadratic", "dim": 2, "half_width": 3.0}
    assert parse_field(spec).shape == (128, 128)
    assert parse_field(spec, grid=17).shape == (17, 17)


def test_weight_and_halfline_specs():
    w = parse_weight({"kind": "sampled", "t": [0, 1, 2, 3], "rho": [1, "0.5", 0.25, 0.125]})
    assert w.kind == "sampled"
    m = parse_halfline({"kind": "profile", "k": 1.0, "c": 1.0, "p": 1.0})
    f = parse_halfline({"kind": "scaled", "base": {"kind": "profile"}, "a": 2.0, "b": 3.0})
    assert float(f(1.0)) == pytest.approx(2 * float(m(3.0)))


@pytest.mark.parametrize(
    "spec",
    [
        {"vertices": [[0, 0]]},
        {"kind": "dodecahedron"},
        {"kind": "polytope"},
        {"kind": "polytope", "vertices": [["a", 0], [1, 0], [0, 1]]},
    ],
)
def test_malformed_body_specs(spec):
    with pytest.raises(SpecError):
        parse_body(spec)


def test_malformed_field_spec():
    with pytest.raises(SpecError, match="dim"):
        parse_field({"kind": "quadratic"})


def test_dumps_is_strict_and_sorted():
    text = dumps({"b": np.float64(np.inf), "a": [np.nan, -np.inf, np.int64(3)], "c": np.array([1.5])})
    assert text.index('"a"') < text.index('"b"')
    obj = decode_floats(json.loads(text))
    assert obj["b"] == math.inf and math.isnan(obj["a"][0]) and obj["a"][1] == -math.inf
    assert obj["c"] == [1.5]


def test_load_json_digest(tmp_path):
    p = tmp_path / "x.json"
    p.write_text('{"kind": "exp"}')
    obj, digest = load_json(p)
    assert obj == {"kind": "exp"} and len(digest) == 64
    p.write_text("{not json")
    with pytest.raises(SpecError, match="invalid JSON"):
        load_json(p)
