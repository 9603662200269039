import json
import shutil
import subprocess
from pathlib import Path

import numpy as np
import pytest

from idfields.cli import lattice_shape, main, parse_grid, read_pgm, to_pgm
from idfields.integrator import tail_certificate
from idfields.spectral import StormProfile, make_moving_maxima

CONFIGS = Path(__file__).resolve().parents[1] / "scripts" / "configs"


def run(argv, capsys=None):
    code = main([str(a) for a in argv])
    out = capsys.readouterr().out if capsys else ""
    return code, out


def test_simulate_csv_byte_identical(tmp_path):
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    for path in (a, b):
        assert run(["simulate", CONFIGS / "moving_maxima.toml", "--seed", 7, "--output", path])[0] == 0
    assert a.read_bytes() == b.read_bytes()
    rows = a.read_text().splitlines()
    assert rows[0] == "t0,value" and len(rows) == 513
    c = tmp_path / "c.csv"
    run(["simulate", CONFIGS / "moving_maxima.toml", "--seed", 8, "--output", c])
    assert c.read_bytes() != a.read_bytes()


def test_simulate_seed_from_environment(tmp_path, monkeypatch):
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    monkeypatch.setenv("IDFIELDS_SEED", "7")
    run(["simulate", CONFIGS / "moving_maxima.toml", "--output", a])
    run(["simulate", CONFIGS / "moving_maxima.toml", "--seed", 7, "--output", b])
    assert a.read_bytes() == b.read_bytes()


def test_boolean_values_are_indicators(tmp_path):
    out = tmp_path / "b.json"
    assert run(["simulate", CONFIGS / "boolean.toml", "--seed", 3, "--out", "json", "--output", out])[0] == 0
    vals = np.asarray(json.loads(out.read_text())["values"])
    assert set(np.unique(vals)) <= {0.0, 1.0}
    assert len(np.unique(vals)) == 2


def test_pgm_raster(tmp_path):
    out = tmp_path / "b.pgm"
    assert run(["simulate", CONFIGS / "boolean.toml", "--seed", 3, "--out", "pgm", "--output", out])[0] == 0
    data = out.read_bytes()
    assert data.startswith(b"P5\n64 64\n255\n")
    img = read_pgm(out)
    assert img.shape == (64, 64) and set(np.unique(img)) <= {0, 255}


def test_gray_ramp():
    v = np.array([2.0, 4.0, 3.0, 2.0])
    img = np.frombuffer(to_pgm(v, (2, 2)).split(b"\n", 3)[3], np.uint8)
    assert img.tolist() == [0, 255, 128, 0]
    flat = np.frombuffer(to_pgm(np.ones(4), (2, 2)).split(b"\n", 3)[3], np.uint8)
    assert flat.tolist() == [0, 0, 0, 0]


def test_lattice_shape():
    g = parse_grid("square:4:1.0")
    assert lattice_shape(g) == (4, 4)
    with pytest.raises(ValueError):
        lattice_shape(g[::-1])


def test_moving_maxima_budget_certificate():
    model = make_moving_maxima(StormProfile("exp_bump"), 1.0, 1)
    grid = np.linspace(-10.0, 10.0, 512)
    budget = 1e-3
    choice = model.window_for(grid, budget)
    a = choice.threshold
    pts = model.index_points(grid)
    # a is the level every grid point reaches except with total probability <= budget
    assert model.miss_prob(pts, a) <= budget
    tails = sum(tail_certificate(model, t, choice.window, [a]).tail_exceed_prob(a) for t in pts)
    assert tails + choice.error_bound <= budget


def test_unknown_key_exits_2_with_report(tmp_path, capsys):
    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps({"model": {"kind": "moving_maxima", "lambda": 1.0, "d": 1,
                                         "storm": {"shape": "exp_bump"}, "colour": "red"}}))
    rep = tmp_path / "rep.json"
    code, _ = run(["fdd-check", bad, "--report", rep], capsys)
    assert code == 2
    r = json.loads(rep.read_text())
    assert r["schema"] == 1 and r["pass"] is False and "colour" in r["error"]
    top = tmp_path / "top.json"
    top.write_text(json.dumps({"model": {"kind": "moving_maxima", "storm": {"shape": "exp_bump"}}, "extra": {}}))
    assert run(["simulate", top, "--grid", "linspace:0:1:3"])[0] == 2


def test_nonpositive_budget_rejected(capsys):
    assert run(["simulate", CONFIGS / "moving_maxima.toml", "--error-budget", 0])[0] == 2


def test_unattainable_budget_reports_smallest(capsys):
    code = main(["simulate", str(CONFIGS / "moving_maxima.toml"), "--grid", "linspace:-1e6:1e6:4000",
                 "--error-budget", "1e-300"])
    assert code == 2
    assert "smallest attainable budget" in capsys.readouterr().err


def test_fdd_check_passes(tmp_path, capsys):
    rep = tmp_path / "r.json"
    code, out = run(["fdd-check", CONFIGS / "moving_maxima.toml", "--seed", 1, "--n", 20_000, "--report", rep],
                    capsys)
    r = json.loads(rep.read_text())
    assert code == 0 and r["pass"] and json.loads(out) == r
    assert len(r["checks"][0]["details"]["queries"]) == 4
    assert r["config_hash"] and r["schema"] == 1 and r["wall_time"] >= 0


def test_maxid_check_passes(tmp_path, capsys):
    rep = tmp_path / "r.json"
    code, _ = run(["maxid-check", CONFIGS / "moving_maxima.toml", "--seed", 2, "--report", rep], capsys)
    r = json.loads(rep.read_text())
    assert code == 0 and r["checks"][0]["statistic"] <= 0.02


def test_failing_check_exits_1(tmp_path, capsys):
    rep = tmp_path / "r.json"
    code, _ = run(["classify", CONFIGS / "poisson_line.toml", "--expected", "dissipative", "--report", rep], capsys)
    assert code == 1
    assert json.loads(rep.read_text())["pass"] is False


def test_classify_poisson_line(tmp_path, capsys):
    rep, curves = tmp_path / "r.json", tmp_path / "c.csv"
    code, _ = run(["classify", CONFIGS / "poisson_line.toml", "--report", rep, "--curves", curves], capsys)
    r = json.loads(rep.read_text())
    assert code == 0 and r["verdict"] == "conservative"
    for key in ("model", "psi", "radii", "verdict", "diverging_fraction", "curves_csv_path"):
        assert key in r
    assert curves.read_text().count("\n") == 201


def test_metrics_audit_seed_determinism(tmp_path, capsys):
    reps = []
    for name in ("a", "b"):
        path = tmp_path / f"{name}.json"
        assert run(["metrics-audit", "--trials", 20, "--n", 2000, "--seed", 5, "--report", path], capsys)[0] == 0
        reps.append(json.loads(path.read_text())["checks"][0]["details"]["per_trial"])
    assert reps[0] == reps[1] and len(reps[0]) == 20
    for row in reps[0]:
        assert row["margin_gamma"] >= 0 and row["margin_kf_upper"] >= 0


def test_figure1_small_deterministic(tmp_path, capsys):
    outs = []
    for name in ("a", "b"):
        d = tmp_path / name
        run(["figure1", "--size", 12, "--seed", 0, "--stationarity-seeds", 0, "--out", d], capsys)
        outs.append(d)
    files = sorted(p.name for p in outs[0].glob("*.pgm"))
    assert files == ["penrose_H0.1.pgm", "penrose_H0.5.pgm", "penrose_H0.9.pgm"]
    for f in files:
        assert (outs[0] / f).read_bytes() == (outs[1] / f).read_bytes()
        assert read_pgm(outs[0] / f).shape == (12, 12)


def test_console_script(tmp_path):
    exe = shutil.which("idfields")
    if exe is None:
        pytest.skip("console script not installed")
    out = tmp_path / "x.csv"
    res = subprocess.run([exe, "simulate", str(CONFIGS / "moving_maxima.toml"), "--seed", "1", "--output", str(out)],
                         capture_output=True, text=True)
    assert res.returncode == 0 and out.exists()
