import json
import os

import numpy as np
import pytest

from turbo_de.cli import (
    build_parser, csv_text, main, read_config, thresholds_report, validate_report,
    write_atomic, z_scores,
)
from turbo_de.ensembles import ScalarSystem
from turbo_de.montecarlo import McEstimate
from turbo_de.transfer import TransferFunction
from turbo_de.trellis import load


def _lines(path):
    return path.read_text().splitlines()


def test_transfer_table(tmp_path):
    out = tmp_path / "t.csv"
    assert main(["transfer", "--ensemble", "pcc", "--grid", "5", "--out", str(out)]) == 0
    lines = _lines(out)
    assert lines[0] == "x,eps,f,g"
    rows = np.array([[float(v) for v in ln.split(",")] for ln in lines[1:]])
    assert rows.shape == (25, 4)
    assert np.all(rows[(rows[:, 0] == 0) | (rows[:, 1] == 0), 2] == 0)
    last = rows[(rows[:, 0] == 1) & (rows[:, 1] == 1)][0]
    assert last[2] == 1.0 and last[3] == 1.0
    mid = rows[(rows[:, 0] == 0.5) & (rows[:, 1] == 0.5)][0]
    # PCC: f(x; eps) is the input-stream output at (eps x, eps)
    ref = TransferFunction(load("1,5/7"))(np.array([0.25, 0.5]))[0]
    assert mid[2] == pytest.approx(ref, abs=1e-11)
    assert np.all(rows[:, 3] == rows[:, 0])


def test_transfer_rejects_wrong_arity():
    assert main(["transfer", "--ensemble", "bcc", "--gen", "1,5/7", "--grid", "3"]) == 2


def test_bad_generator_exit_code(capsys):
    assert main(["transfer", "--gen", "1,5/8", "--grid", "3"]) == 2
    assert "error" in capsys.readouterr().err


def test_potential_curves(tmp_path):
    out, summary = tmp_path / "u.csv", tmp_path / "u.json"
    assert main(["potential", "--eps", "0.5,0.7", "--grid", "1000", "--out", str(out),
                 "--summary", str(summary)]) == 0
    rows = np.loadtxt(out, delimiter=",", skiprows=1)
    assert _lines(out)[0] == "x,eps,U,Uprime"
    assert rows.shape == (2002, 4)
    low, high = rows[:1001], rows[1001:]
    assert low[0, 2] == 0.0 and high[0, 2] == 0.0
    assert np.all(high[1:, 2] < low[1:, 2])
    curves = json.loads(summary.read_text())["curves"]
    assert curves[0]["u"] is None and curves[0]["interior_sign_changes"] == 0
    assert curves[1]["u"] is not None and curves[1]["min_U_above_u"] < 0


def _stub(f):
    ident = lambda x: np.asarray(x, dtype=float)  # noqa: E731
    return ScalarSystem("stub", f, ident, lambda x: np.ones_like(np.asarray(x, float)), True)


def test_thresholds_report_fields():
    report = thresholds_report(_stub(lambda x, e: np.zeros_like(np.asarray(x, float))),
                               "none", 1e-6, 1000)
    assert report["eps_bp"] == 1.0 and report["eps_star"] == 1.0
    assert set(report) == {"ensemble", "generator", "eps_bp", "eps_star", "tolerances",
                           "bp", "potential"}
    assert report["tolerances"] == {"eps": 1e-6, "grid": 1000}
    json.dumps(report)


def test_thresholds_report_quadratic_stub():
    # f(x; eps) = min(4 eps x^2, 1): the fixed point 1/(4 eps) enters (0, 1] at eps = 1/4
    report = thresholds_report(_stub(lambda x, e: np.minimum(4 * np.asarray(e) * x * x, 1.0)),
                               "quad", 1e-6, 1000)
    assert report["eps_bp"] == pytest.approx(0.25, abs=1e-6)
    assert report["bp"]["bracket_width"] <= 1e-6


def test_z_scores_saturated_points():
    exact = np.array([0.0, 1.0])
    mc = McEstimate(np.array([0.0, 1.0]), np.zeros(2), np.zeros(2), 4000)
    assert np.array_equal(z_scores(exact, mc, 4000), np.zeros(2))


def test_validate_extreme_points():
    report = validate_report(load("1,5/7"), "1,5/7", 0, 200, 20, 3,
                             extra_points=[(0.0, 0.0), (1.0, 1.0)])
    for rec in report["points"]:
        assert rec["z"] == [0.0, 0.0] and rec["within"]
    assert report["points"][0]["exact"] == [0.0, 0.0]
    assert report["points"][1]["exact"] == [1.0, 1.0]
    assert report["passed"]


def test_validate_small_run(tmp_path):
    out = tmp_path / "v.json"
    assert main(["validate", "--points", "3", "--N", "300", "--trials", "30",
                 "--seed", "5", "--out", str(out)]) == 0
    report = json.loads(out.read_text())
    assert len(report["points"]) == 3 and report["passed"]


def test_config_file_and_precedence(tmp_path):
    cfg = tmp_path / "run.cfg"
    cfg.write_text("# comment\nensemble = pcc\ngrid=3\n\nout = ignored.csv\n")
    out = tmp_path / "t.csv"
    assert main(["transfer", "--config", str(cfg), "--grid", "4", "--out", str(out)]) == 0
    assert len(_lines(out)) == 17
    assert not (tmp_path / "ignored.csv").exists()


def test_config_dash_and_underscore_keys(tmp_path):
    parser = build_parser()
    cfg = tmp_path / "c.cfg"
    cfg.write_text("max-iter=7\nwave_eps=0.3\n")
    assert read_config(str(cfg)) == {"max_iter": "7", "wave_eps": "0.3"}
    assert parser.parse_args(["coupled"]).max_iter == 100_000


@pytest.mark.parametrize("content", ["grid\n", "colour=red\n", "grid=many\n", "ensemble=xyz\n"])
def test_invalid_config_exit_code(tmp_path, content):
    cfg = tmp_path / "bad.cfg"
    cfg.write_text(content)
    assert main(["transfer", "--config", str(cfg)]) == 2


def test_missing_config_exit_code(tmp_path):
    assert main(["transfer", "--config", str(tmp_path / "nope.cfg")]) == 2


@pytest.mark.parametrize("argv", [
    ["transfer", "--grid", "1"],
    ["potential", "--grid", "10"],
    ["potential", "--eps", "1.5"],
    ["coupled", "--m", "-1"],
    ["validate", "--points", "0"],
    ["thresholds", "--tol", "0"],
])
def test_invalid_arguments(argv):
    assert main(argv) == 2


def test_deterministic_outputs(tmp_path):
    a, b = tmp_path / "a.json", tmp_path / "b.json"
    argv = ["validate", "--points", "2", "--N", "200", "--trials", "20", "--seed", "9"]
    assert main(argv + ["--out", str(a)]) == 0
    assert main(argv + ["--out", str(b)]) == 0
    assert a.read_bytes() == b.read_bytes()
    c, d = tmp_path / "c.csv", tmp_path / "d.csv"
    assert main(["transfer", "--ensemble", "scc", "--grid", "6", "--out", str(c)]) == 0
    assert main(["transfer", "--ensemble", "scc", "--grid", "6", "--out", str(d)]) == 0
    assert c.read_bytes() == d.read_bytes()


def test_write_atomic_leaves_no_temporaries(tmp_path):
    target = tmp_path / "x.txt"
    target.write_text("old")
    write_atomic(str(target), "new\n")
    assert target.read_text() == "new\n"
    assert os.listdir(tmp_path) == ["x.txt"]


def test_write_atomic_failure_keeps_old_file(tmp_path):
    target = tmp_path / "x.txt"
    target.write_text("old")

    with pytest.raises(TypeError):
        write_atomic(str(target), 123)  # not text
    assert target.read_text() == "old"
    assert os.listdir(tmp_path) == ["x.txt"]


def test_write_atomic_stdout(capsys):
    write_atomic("-", "hello\n")
    assert capsys.readouterr().out == "hello\n"


def test_csv_format():
    assert csv_text(["a", "b"], [(0.1, "s"), (1e-20, 2)]) == "a,b\n0.1,s\n1e-20,2\n"


def test_coupled_small_run_with_waves(tmp_path):
    out, waves = tmp_path / "c.json", tmp_path / "w.csv"
    assert main(["coupled", "--L", "8", "--m", "0,2", "--tol", "1e-3", "--waves", str(waves),
                 "--wave-eps", "0.6", "--every", "2", "--out", str(out)]) == 0
    report = json.loads(out.read_text())
    assert [r["m"] for r in report["results"]] == [0, 2]
    assert all(0.6 < r["threshold"] < 0.7 for r in report["results"])
    rows = np.loadtxt(waves, delimiter=",", skiprows=1)
    assert _lines(waves)[0] == "iter,t,x"
    assert set(rows[:, 1].astype(int)) == set(range(1, 9))
    iters = np.unique(rows[:, 0])
    assert np.all(iters[:-1] % 2 == 0)
    assert rows[rows[:, 0] == iters[-1], 2].max() < 1e-9
