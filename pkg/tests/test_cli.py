import json
import math

import pytest

from quatgeo.cli import config_hash, dumps, main


def _read(path):
    return json.loads(path.read_text())


def _svg_data(path):
    text = path.read_text()
    start = text.index('<metadata id="data">') + len('<metadata id="data">')
    rows = text[start: text.index("</metadata>")].strip().splitlines()
    assert rows[0] == "series,x,y"
    return [r.split(",") for r in rows[1:]]


def test_plucker_cuspidal_cubic(tmp_path):
    assert main(["plucker", "--preset", "cuspidal-cubic", "--out", str(tmp_path)]) == 0
    rep = _read(tmp_path / "report.json")
    assert rep["ordH"] == 3 == rep["classical_ordH"]
    assert rep["residual"] == 0 and rep["pass"] is True
    assert rep["ordH_label"] == "exact"
    assert sorted(p["order"] for p in rep["weierstrass_points"]) == [1, 2]


def test_plucker_partial_point_list_fails(tmp_path):
    # a single point only bounds ord H from below, so the relation is violated
    assert main(["plucker", "--preset", "cuspidal-cubic", "--points", "0:0", "--out", str(tmp_path)]) == 1
    rep = _read(tmp_path / "report.json")
    assert rep["ordH"] == 2 and rep["residual"] == 1 and rep["pass"] is False
    assert rep["ordH_label"] == "lower bound on ord H"


def test_plucker_system_file(tmp_path):
    sysf = tmp_path / "system.json"
    sysf.write_text(json.dumps({"degree": 3, "genus": 0,
                                "basis": [{"coeffs": [1]}, {"coeffs": [0, 0, 1]}, {"terms": [[3, 0, 1.0, 0.0]]}]}))
    assert main(["plucker", "--system", str(sysf), "--out", str(tmp_path / "o")]) == 0
    assert _read(tmp_path / "o" / "report.json")["ordH"] == 3


def test_dirac_round_sphere_preset(tmp_path):
    assert main(["dirac", "--preset", "round-sphere", "--out", str(tmp_path)]) == 0
    lines = (tmp_path / "spectrum.csv").read_text().splitlines()
    assert lines[0] == "lambda,mult_quat,lhs,rhs,margin,pass"
    first = min((line.split(",") for line in lines[1:]), key=lambda r: abs(float(r[0]) - 1.0))
    assert abs(float(first[0]) - 1.0) < 0.02 and first[1] == "1"
    rep = _read(tmp_path / "report.json")
    assert rep["pass"] and rep["tolerances"]["bound_slack"] == 1e-2


def test_dirac_flat_torus_with_plot(tmp_path):
    assert main(["dirac", "--preset", "flat-torus", "--spin", "1/2,1/2", "--k", "20", "--plot",
                 "--out", str(tmp_path)]) == 0
    rep = _read(tmp_path / "report.json")
    assert rep["checks"] == {"bounds": True, "hermitian": True, "oracle": True}
    assert rep["oracle"]["max_deviation"] < 1e-6
    rows = _svg_data(tmp_path / "spectrum.svg")
    assert {r[0] for r in rows} == {"lambda^2 area", "bound"}
    lams = sorted(float(r[1]) for r in rows if r[0] == "bound")
    assert min(abs(v) for v in lams) == pytest.approx(1 / math.sqrt(2), abs=1e-9)


def test_dirac_config_file(tmp_path):
    cfg = tmp_path / "domain.json"
    cfg.write_text(json.dumps({"domain": {"type": "torus", "tau_re": 0.0, "tau_im": 1.0, "nx": 8, "ny": 8,
                                          "scale": 2 * math.pi}, "spin": "1/2,0", "k": 12}))
    assert main(["dirac", "--domain", str(cfg), "--out", str(tmp_path / "o")]) == 0
    assert _read(tmp_path / "o" / "report.json")["genus"] == 1


def test_willmore_preset(tmp_path):
    assert main(["willmore", "--preset", "revolution-torus", "--out", str(tmp_path)]) == 0
    rep = _read(tmp_path / "report.json")
    assert abs(rep["W"] - 2 * math.pi**2) < 0.01 * 2 * math.pi**2
    assert rep["W_relative_difference"] < 5e-3


def test_riemann_roch_default_sweep(tmp_path):
    assert main(["riemann-roch", "--plot", "--out", str(tmp_path)]) == 0
    rep = _read(tmp_path / "report.json")
    assert [(r["h0"], r["index"]) for r in rep["results"]] == [(1, 0), (0, 0), (2, 0)]
    assert all(r["h0"] == r["oracle_h0"] for r in rep["results"])
    assert len(_svg_data(tmp_path / "singular_values.svg")) == 60


def test_spectral_genus_equator(tmp_path):
    assert main(["spectral-genus", "--preset", "equator-geodesic", "--grid", "11", "--plot",
                 "--out", str(tmp_path)]) == 0
    rep = _read(tmp_path / "summary.json")
    assert rep["genus"] == 0 and rep["branch_points"] == []
    assert rep["bounds"]["pass"] and rep["energy"] == pytest.approx(2 * math.pi**2)
    assert (tmp_path / "trace.svg").exists()


def test_reports_are_deterministic(tmp_path):
    for d in ("a", "b"):
        assert main(["riemann-roch", "--out", str(tmp_path / d)]) == 0
    assert (tmp_path / "a" / "report.json").read_bytes() == (tmp_path / "b" / "report.json").read_bytes()


def test_reports_embed_hash_and_tolerances(tmp_path):
    cfg = tmp_path / "rr.json"
    cfg.write_text(json.dumps({"q": [0.2]}))
    assert main(["riemann-roch", "--config", str(cfg), "--out", str(tmp_path / "one")]) == 0
    assert main(["riemann-roch", "--out", str(tmp_path / "two")]) == 0
    one, two = _read(tmp_path / "one" / "report.json"), _read(tmp_path / "two" / "report.json")
    assert len(one["config_hash"]) == 64 and one["config_hash"] != two["config_hash"]
    assert one["tolerances"] == {"gap": 1e-4, "rtol": 1e-8}


def test_missing_input_writes_nothing(tmp_path, capsys):
    out = tmp_path / "out"
    assert main(["willmore", "--config", str(tmp_path / "nope.json"), "--out", str(out)]) == 2
    assert not out.exists()
    assert "not found" in capsys.readouterr().err


def test_malformed_json_reports_position(tmp_path, capsys):
    bad = tmp_path / "bad.json"
    bad.write_text('{"preset": "sphere",\n "params": {]}')
    out = tmp_path / "out"
    assert main(["willmore", "--config", str(bad), "--out", str(out)]) == 2
    err = capsys.readouterr().err
    assert "line 2" in err and "column" in err
    assert not out.exists()


@pytest.mark.parametrize("argv", [
    ["dirac", "--preset", "flat-torus", "--spin", "0.3,0"],
    ["dirac", "--preset", "flat-torus", "--cluster-tol", "-1"],
    ["dirac", "--preset", "klein-bottle"],
    ["spectral-genus", "--preset", "equator-geodesic", "--annulus", "0.5,4"],
    ["spectral-genus", "--preset", "wente"],
    ["plucker", "--preset", "rational-normal(x)"],
    ["plucker", "--preset", "cuspidal-cubic", "--points", "moon:1"],
])
def test_input_errors_exit_two(tmp_path, argv):
    out = tmp_path / "out"
    assert main(argv + ["--out", str(out)]) == 2
    assert not out.exists()


def test_bad_thread_setting(tmp_path, monkeypatch):
    monkeypatch.setenv("QUATGEO_THREADS", "many")
    assert main(["riemann-roch", "--out", str(tmp_path / "o")]) == 2


def test_unknown_flag_is_a_usage_error():
    with pytest.raises(SystemExit) as err:
        main(["dirac", "--frobnicate"])
    assert err.value.code == 2


def test_no_temporary_files_remain(tmp_path):
    assert main(["plucker", "--preset", "rational-normal(3)", "--out", str(tmp_path)]) == 0
    assert sorted(p.name for p in tmp_path.iterdir()) == ["report.json"]


def test_dumps_formatting():
    text = dumps({"b": 0.1, "a": [1, 2.5], "c": complex(1, -2), "d": float("nan")})
    assert text.index('"a"') < text.index('"b"')
    assert "0.10000000000000001" in text
    assert '"NaN"' in text
    assert config_hash({"x": 1}) == config_hash({"x": 1})
    with pytest.raises(TypeError):
        dumps(object())
