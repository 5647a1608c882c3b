import json
from pathlib import Path

import pytest

from santalo.cli import main
from santalo.io import decode_floats

SPECS = Path(__file__).resolve().parents[1] / "specs"


def spec(name):
    return str(SPECS / name)


def run(capsys, *argv):
    code = main(list(argv))
    out = capsys.readouterr()
    return code, out.out, out.err


def run_json(capsys, *argv):
    code, out, err = run(capsys, *argv)
    assert code == 0, err
    return decode_floats(json.loads(out))


def test_volume_product_square(capsys):
    rep = run_json(capsys, "volume-product", "--input", spec("square.json"))
    assert rep["command"] == "volume-product"
    assert rep["result"]["product"] == pytest.approx(8.0)
    assert spec("square.json") in rep["inputs"]
    assert rep["defaults"]["tol"] == 1e-6


def test_santalo_point_triangle(capsys):
    rep = run_json(capsys, "santalo-point", "--input", spec("triangle.json"))
    assert rep["result"]["z"] == pytest.approx([1 / 3, 1 / 3], abs=1e-7)


def test_polar_and_bm_ball(capsys):
    rep = run_json(capsys, "polar", "--input", spec("square.json"), "--center", "0,0")
    assert len(rep["result"]["polar"]["vertices"]) == 4
    rep = run_json(capsys, "bm-ball", "--input", spec("square.json"))
    assert rep["result"]["log_lambda"] == pytest.approx(0.34657359, abs=1e-6)


def test_weight_validate(capsys):
    rep = run_json(capsys, "weight-validate", "--weight", spec("exp.json"))
    assert rep["result"]["weight"]["t0"] == 1.0
    code, out, err = run(capsys, "weight-validate", "--weight", spec("bad_weight.json"))
    assert code == 1 and "not log-concave" in err


def test_functional_product_and_fy_gap(capsys):
    rep = run_json(capsys, "functional-product", "--weight", spec("exp.json"), "--phi", spec("quad.json"))
    assert abs(rep["result"]["deficit_minus"]) < 1e-3
    rep = run_json(capsys, "fy-gap", "--phi", spec("quad.json"), "--psi", spec("quad.json"), "--grid", "33")
    assert rep["result"]["min_gap"] == pytest.approx(0.0, abs=1e-12)


def test_borell_fit(capsys):
    rep = run_json(capsys, "borell-fit", "--M", spec("borell_M.json"), "--F", spec("borell_F.json"), "--G", spec("borell_G.json"))
    assert rep["result"]["ratio"] == pytest.approx(1.0, abs=1e-6)
    assert 1 / rep["result"]["fit_a"] == pytest.approx(2.0, rel=1e-3)


def test_json_output_is_deterministic(capsys, tmp_path):
    args = ["psi-measure", "--phi", spec("spike.json"), "--weight", spec("exp.json"), "--eps", "1e-4", "--R", "1,2"]
    a = run(capsys, *args)
    b = run(capsys, *args)
    assert a == b and a[0] == 0
    out = tmp_path / "r.json"
    assert main(args + ["--output", str(out)]) == 0
    assert out.read_text() == a[1]


def test_csv_output(capsys):
    code, out, _ = run(capsys, "volume-product", "--input", spec("square.json"), "--format", "csv")
    assert code == 0
    rows = out.strip().splitlines()
    assert rows[0] == "key,value" and any(r.startswith("product,") for r in rows)


@pytest.mark.slow
def test_scan_csv_has_one_row_per_step(capsys):
    code, out, _ = run(capsys, "scan", "--family", "truncated-quadratic", "--n", "1", "--steps", "4",
                       "--grid", "1025", "--format", "csv")
    assert code == 0
    rows = out.strip().splitlines()
    assert rows[0].startswith("delta,eps,R,") and len(rows) == 5


@pytest.mark.parametrize(
    "argv",
    [
        ["frobnicate"],
        ["volume-product"],
        ["volume-product", "--input", "/nonexistent.json"],
        ["volume-product", "--input", str(SPECS / "square.json"), "--center", "0,x"],
        ["volume-product", "--input", str(SPECS / "square.json"), "--center", "0,0,0"],
        ["scan"],
        ["legendre", "--phi", str(SPECS / "exp.json")],
    ],
)
def test_parse_errors_exit_two(capsys, argv):
    code, _, err = run(capsys, *argv)
    assert code == 2 and err.startswith("santalo:")


def test_domain_error_exit_one(capsys):
    code, _, err = run(capsys, "volume-product", "--input", spec("square.json"), "--center", "1,1")
    assert code == 1 and "center not interior" in err


def test_selftest_rejects_bad_weight(capsys):
    code, _, err = run(capsys, "selftest", "--quick", "--weight", spec("bad_weight.json"))
    assert code == 1 and "not log-concave" in err


def test_version(capsys):
    with pytest.raises(SystemExit) as exc:
        main(["--version"])
    assert exc.value.code == 0
