import json

import pytest

from hardylab import cli


def _write(tmp_path, cfg, name="cfg.json"):
    path = tmp_path / name
    path.write_text(json.dumps(cfg))
    return str(path)


def _quiet(*args, **kwargs):
    pass


def test_list_and_describe(capsys):
    assert cli.main(["list"]) == 0
    assert "cor42-N4-p3" in capsys.readouterr().out.split()
    assert cli.main(["describe", "cor44-N6"]) == 0
    out = capsys.readouterr().out
    assert "Corollary 4.4" in out and "C_6 = 3" in out
    assert cli.main(["describe", "nope"]) == cli.EXIT_UNKNOWN


def test_empty_suite(tmp_path):
    out = tmp_path / "out"
    assert cli.run_suite(_write(tmp_path, {"suite_name": "empty", "cases": []}), out, log=_quiet) == 0
    assert (out / "summary.csv").read_text() == "case_id,p,N,lhs,residual,rel_residual,pass\n"


def test_suite_reports(tmp_path):
    cfg = {"suite_name": "s", "cases": ["cor42-N3-p2", {"id": "poincare-1d", "u": {"type": "parabola"}}]}
    out = tmp_path / "out"
    assert cli.run_suite(_write(tmp_path, cfg), out, log=_quiet) == 0
    rep = json.loads((out / "000-cor42-N3-p2.json").read_text())
    assert rep["schema"] == "1" and rep["pass"] and rep["pde_check"]["ok"]
    assert set(rep["rhs_terms"]) == {"main_term", "cp_remainder"}
    rows = (out / "summary.csv").read_text().splitlines()
    assert len(rows) == 3 and rows[2].startswith("poincare-1d,2.0,1,")


def test_perturbed_lambda_fails(tmp_path):
    cfg = {"cases": [{"id": "cor42-N3-p1.5", "lambda_scale": 1.01}]}
    out = tmp_path / "out"
    assert cli.run_suite(_write(tmp_path, cfg), out, log=_quiet) == cli.EXIT_FAIL
    rep = json.loads((out / "000-cor42-N3-p1.5.json").read_text())
    main = rep["rhs_terms"]["main_term"]["value"] / 1.01
    assert rep["rel_residual"] == pytest.approx(0.01 * main / rep["lhs"]["value"], rel=1e-6)
    assert not rep["pass"] and not rep["pde_check"]["ok"]


def test_inline_case(tmp_path):
    inline = {
        "theorem": "hardy",
        "system": {"kind": "euclidean", "N": 3},
        "p": 2,
        "N": 3,
        "lambda": 0.25,
        "weights": {"phi": {"type": "radial_power", "exponent": -0.5}, "W": {"type": "radial_power", "exponent": -2}},
        "u": {"type": "annular", "seed": 4},
        "resolution": 6,
    }
    assert cli.run_suite(_write(tmp_path, {"cases": [inline]}), tmp_path / "o", log=_quiet) == 0
    inline["lambda"] = 0.3
    assert cli.run_suite(_write(tmp_path, {"cases": [inline]}), tmp_path / "o2", log=_quiet) == cli.EXIT_FAIL


def test_inline_grushin(tmp_path):
    inline = {
        "id": "my-grushin",
        "theorem": "hardy",
        "system": {"kind": "grushin", "m": 1, "k": 1, "gamma": 1},
        "p": 2,
        "N": 2,
        "lambda": 0.25,
        "weights": {
            "phi": {"type": "gauge_power", "exponent": -0.5},
            "W": {"type": "gauge_weight", "x_exponent": 2, "gauge_exponent": -4},
        },
    }
    assert cli.run_suite(_write(tmp_path, {"cases": [inline]}), tmp_path / "o", log=_quiet) == 0


@pytest.mark.parametrize(
    "cfg,code",
    [
        ({"cases": ["zzz"]}, cli.EXIT_UNKNOWN),
        ({"cases": [{"id": "zzz"}]}, cli.EXIT_UNKNOWN),
        ({"cases": [1]}, cli.EXIT_CONFIG),
        ({"cases": ["cor42-N3-p2"], "extra": 1}, cli.EXIT_CONFIG),
        ({"cases": ["cor42-N3-p2"], "quadrature": {"points_per_axis": 1}}, cli.EXIT_CONFIG),
        ({"cases": [{"id": "cor42-N3-p2", "u": {"type": "sine"}}]}, cli.EXIT_CONFIG),
        ({"cases": [{"theorem": "hardy", "system": {"kind": "euclidean", "N": 2}, "p": 2, "N": 3, "lambda": 1,
                     "weights": {"phi": {"type": "constant"}, "W": {"type": "constant"}}}]}, cli.EXIT_CONFIG),
    ],
)
def test_config_errors(tmp_path, cfg, code):
    assert cli.run_suite(_write(tmp_path, cfg), tmp_path / "o", log=_quiet) == code


def test_bad_json_and_missing_file(tmp_path):
    p = tmp_path / "bad.json"
    p.write_text("{")
    assert cli.run_suite(str(p), tmp_path / "o", log=_quiet) == cli.EXIT_CONFIG
    assert cli.run_suite(str(tmp_path / "missing.json"), tmp_path / "o", log=_quiet) == cli.EXIT_CONFIG


def test_quadrature_abort_exit_code(tmp_path, monkeypatch):
    from hardylab import quadrature

    def boom(*a, **k):
        raise quadrature.QuadratureAbort("non-finite integrand value", location=[0.0])

    monkeypatch.setattr("hardylab.identities.quad.integrate", boom)
    out = tmp_path / "o"
    assert cli.run_suite(_write(tmp_path, {"cases": ["cor42-N3-p2"]}), out, log=_quiet) == cli.EXIT_ABORT
    rep = json.loads((out / "000-cor42-N3-p2.json").read_text())
    assert rep["kind"] == "quadrature_abort"


def test_deterministic_summary(tmp_path, monkeypatch):
    cfg = _write(tmp_path, {"cases": ["cor41-N3-p1.5", "cor43-N5-p2", "grushin-hardy"]})
    monkeypatch.setenv("HARDYLAB_THREADS", "1")
    assert cli.run_suite(cfg, tmp_path / "a", log=_quiet) == 0
    monkeypatch.setenv("HARDYLAB_THREADS", "3")
    assert cli.run_suite(cfg, tmp_path / "b", log=_quiet) == 0
    assert (tmp_path / "a" / "summary.csv").read_bytes() == (tmp_path / "b" / "summary.csv").read_bytes()
    for name in ("000-cor41-N3-p1.5.json", "001-cor43-N5-p2.json"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()


def test_constants_command(tmp_path, capsys):
    assert cli.main(["constants", "--p", "2", "--which", "c1", "--out", str(tmp_path)]) == 0
    rec = json.loads((tmp_path / "constants.json").read_text())[0]
    assert rec["schema"] == "1" and abs(rec["value"] - 1.0) <= 1e-8
    assert {"value", "bracket", "argmin", "boundary_limit"} <= set(rec)

    assert cli.main(["constants", "--p", "1.5", "--which", "c2,c3", "--out", str(tmp_path)]) == 0
    recs = {r["which"]: r for r in json.loads((tmp_path / "constants.json").read_text())}
    assert 0 < recs["c2"]["value"] <= 1.5 * 0.5 / 2**0.5
    assert recs["c3"]["value"] >= 1.5 / 2**0.5

    assert cli.main(["constants", "--p", "1.5", "--which", "c1", "--out", str(tmp_path)]) == cli.EXIT_RANGE
    assert cli.main(["constants", "--p", "1.5", "--which", "c9", "--out", str(tmp_path)]) == cli.EXIT_CONFIG
    capsys.readouterr()


def test_builtin_suite_name(tmp_path):
    assert cli.load_config("corollaries-default")["cases"][0].startswith("cor")
    with pytest.raises(cli.ConfigError):
        cli.load_config("no-such-suite")
