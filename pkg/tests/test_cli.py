import json
from pathlib import Path

import numpy as np
import pytest

from warmnet.artifacts import read_mu, read_snapshots
from warmnet.cli import main


def only_dir(root: Path, prefix: str) -> Path:
    dirs = sorted(root.glob(f"{prefix}-*"))
    assert len(dirs) == 1, dirs
    return dirs[0]


SIM = ["simulate", "--graph", "torus:d=2,n=6", "--alpha", "0.4", "--t-max", "400", "--t0", "1"]


def test_simulate_files(tmp_path):
    assert main(SIM + ["--seed", "1", "--seed", "2", "--out", str(tmp_path)]) == 0
    d = only_dir(tmp_path, "simulate")
    for seed in (1, 2):
        series = read_snapshots(d / f"snapshots_seed{seed}.csv")
        assert series.times[-1] == 400.0 and series.n_edges == 72
        summary = json.loads((d / f"summary_seed{seed}.json").read_text())
        assert summary["schema_version"] == 1
        assert summary["config"]["graph"] == {"kind": "torus", "d": 2, "n": 6}
        assert summary["seed"] == seed and summary["t_max"] == 400.0
        assert summary["max_x"] == pytest.approx(series.x[-1].max())
        assert summary["event_count"] == int((series.weights[-1] - 1).sum())
    header = (d / "snapshots_seed1.csv").read_text().splitlines()[0]
    assert header == "t,edge_id,weight,x"


def test_simulate_rerun_byte_identical(tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    assert main(SIM + ["--seed", "4", "--seed", "6", "--out", str(a)]) == 0
    assert main(SIM + ["--seed", "4", "--seed", "6", "--out", str(b), "--workers", "2"]) == 0
    da, db = only_dir(a, "simulate"), only_dir(b, "simulate")
    assert da.name == db.name
    for f in da.iterdir():
        assert f.read_bytes() == (db / f.name).read_bytes()


def test_simulate_resume_identical(tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    assert main(SIM + ["--seed", "3", "--seed", "5", "--out", str(a)]) == 0
    assert main(SIM + ["--seed", "3", "--seed", "5", "--out", str(b), "--stop-at", "123.4"]) == 0
    db = only_dir(b, "simulate")
    assert not (db / "snapshots_seed3.csv").exists()
    assert (db / "checkpoint_seed3.json").exists()
    assert main(SIM + ["--seed", "3", "--seed", "5", "--out", str(b), "--resume"]) == 0
    da = only_dir(a, "simulate")
    for name in ("snapshots_seed3.csv", "snapshots_seed5.csv", "summary_seed3.json", "summary_seed5.json"):
        assert (da / name).read_bytes() == (db / name).read_bytes()


def test_simulate_refuses_strong_alpha(tmp_path, capsys):
    code = main(["simulate", "--graph", "cycle:n=10", "--alpha", "1.2", "--seed", "1", "--out", str(tmp_path)])
    assert code == 2
    assert "weak reinforcement" in capsys.readouterr().err


def test_simulate_strong_alpha_override(tmp_path):
    code = main(["simulate", "--graph", "cycle:n=10", "--alpha", "1.2", "--seed", "1", "--t-max", "50",
                 "--override-strong-alpha", "--out", str(tmp_path)])
    assert code == 0


def test_simulate_needs_seed(tmp_path):
    assert main(["simulate", "--graph", "cycle:n=10", "--alpha", "0.3", "--out", str(tmp_path)]) == 2


def test_bad_graph_spec(tmp_path):
    assert main(["simulate", "--graph", "moebius:n=3", "--alpha", "0.3", "--seed", "1", "--out", str(tmp_path)]) == 2
    assert main(["simulate", "--graph", "cycle:n=2", "--alpha", "0.3", "--seed", "1", "--out", str(tmp_path)]) == 2


def test_config_file_and_flag_override(tmp_path):
    cfg = tmp_path / "exp.ini"
    cfg.write_text(
        "[graph]\nkind = cycle\nn = 12\n\n[sim]\nalpha = 0.9\nt_max = 50\nseeds = 1, 2\n\n"
        f"[output]\ndir = {tmp_path / 'o'}\n",
        encoding="utf-8",
    )
    assert main(["simulate", "--config", str(cfg), "--alpha", "0.25"]) == 0
    d = only_dir(tmp_path / "o", "simulate")
    summary = json.loads((d / "summary_seed2.json").read_text())
    assert summary["alpha"] == 0.25 and summary["config"]["seeds"] == [1, 2]


def test_config_unknown_key(tmp_path):
    cfg = tmp_path / "exp.ini"
    cfg.write_text("[sim]\nbogus = 1\n", encoding="utf-8")
    assert main(["simulate", "--config", str(cfg)]) == 2


def test_edge_list_graph(tmp_path):
    el = tmp_path / "g.txt"
    el.write_text("# star\n0 1\n0 2\n0 3\n", encoding="utf-8")
    assert main(["equilibrium", "--graph", f"edgelist:path={el}", "--alpha", "0.5", "--out", str(tmp_path)]) == 0
    mu = read_mu(only_dir(tmp_path, "equilibrium") / "mu.csv")
    np.testing.assert_allclose(mu, 4 / 3, atol=1e-9)


def test_equilibrium_cycle(tmp_path):
    assert main(["equilibrium", "--graph", "cycle:n=100", "--alpha", "0.4", "--out", str(tmp_path)]) == 0
    d = only_dir(tmp_path, "equilibrium")
    assert np.max(np.abs(read_mu(d / "mu.csv") - 1.0)) <= 1e-9
    report = json.loads((d / "solver.json").read_text())
    assert report["in_compact_set"] and report["residual"] <= 1e-12
    assert set(report) >= {"iterations", "residual", "in_compact_set", "restarts_agree", "schema_version", "config"}


def test_equilibrium_star(tmp_path):
    assert main(["equilibrium", "--graph", "star:leaves=3", "--alpha", "0.6", "--out", str(tmp_path)]) == 0
    np.testing.assert_allclose(read_mu(only_dir(tmp_path, "equilibrium") / "mu.csv"), 4 / 3, atol=1e-9)


def test_equilibrium_restarts(tmp_path):
    assert main(["equilibrium", "--graph", "torus:d=2,n=5", "--alpha", "0.4", "--restarts", "10",
                 "--out", str(tmp_path)]) == 0
    report = json.loads((only_dir(tmp_path, "equilibrium") / "solver.json").read_text())
    assert report["restarts"] == 10
    assert report["restarts_agree"] and report["max_pairwise_distance"] <= 1e-8


def test_equilibrium_nonconvergence_exit_code(tmp_path):
    code = main(["equilibrium", "--graph", "grid:d=2,n=5", "--alpha", "0.5", "--max-iter", "2",
                 "--tol", "1e-15", "--out", str(tmp_path)])
    assert code == 3
    report = json.loads((only_dir(tmp_path, "equilibrium") / "solver.json").read_text())
    assert report["status"] == "failed" and len(report["residual_history_tail"]) == 2


@pytest.fixture
def sim_dir(tmp_path):
    assert main(SIM + ["--t-max", "2000", "--seed", "1", "--out", str(tmp_path)]) == 0
    return only_dir(tmp_path, "simulate")


def test_analyze_const_mu(sim_dir, tmp_path):
    out = tmp_path / "an"
    assert main(["analyze", "--run", str(sim_dir), "--mu-const", "0.5", "--delta", "0.1,0.3,0.5",
                 "--out", str(out)]) == 0
    d = only_dir(out, "analyze")
    report = json.loads((d / "analysis.json").read_text())
    run = report["runs"]["1"]
    dev = [v for _, v in run["deviation_series"]]
    assert dev[-1] < dev[6]  # t = 2000 vs t = 64
    assert run["unstable_sets_nested"]
    assert set(run["unstable"]) == {"0.1", "0.3", "0.5"}
    assert run["rate_bound_violations"] == []
    assert (d / "deviation_seed1.csv").read_text().splitlines()[0] == "t,sup_deviation"
    limits = (d / "limits_seed1.csv").read_text().splitlines()
    assert limits[0] == "edge_id,x_minus_hat,x_plus_hat" and len(limits) == 73


def test_analyze_with_solver_mu(sim_dir, tmp_path):
    assert main(["equilibrium", "--graph", "torus:d=2,n=6", "--alpha", "0.4", "--out", str(tmp_path / "eq")]) == 0
    mu = only_dir(tmp_path / "eq", "equilibrium") / "mu.csv"
    assert main(["analyze", "--run", str(sim_dir), "--mu", str(mu), "--out", str(tmp_path / "an")]) == 0


def test_analyze_missing_mu(sim_dir, tmp_path):
    assert main(["analyze", "--run", str(sim_dir), "--mu", str(tmp_path / "nope.csv"), "--out", str(tmp_path)]) == 4


def test_analyze_edge_mismatch(sim_dir, tmp_path):
    assert main(["equilibrium", "--graph", "cycle:n=7", "--alpha", "0.4", "--out", str(tmp_path / "eq")]) == 0
    mu = only_dir(tmp_path / "eq", "equilibrium") / "mu.csv"
    assert main(["analyze", "--run", str(sim_dir), "--mu", str(mu), "--out", str(tmp_path)]) == 2


def test_bootstrap_auto(tmp_path):
    assert main(["bootstrap", "--alpha", "0.5", "--delta", "2", "--auto", "--out", str(tmp_path)]) == 0
    seq = json.loads((only_dir(tmp_path, "bootstrap") / "bootstrap.json").read_text())["bound_sequence"]
    assert seq["a"][0] == 0.5 and seq["b"][0] == 2.0
    assert seq["ratio"][0] == 4.0 and seq["ratio"][1] <= 2.0 * (1 + 1e-12)
    assert seq["converged"]


def test_bootstrap_delta3(tmp_path):
    assert main(["bootstrap", "--alpha", "0.51", "--delta", "3", "--a1", "0.6", "--b1", "0.8",
                 "--out", str(tmp_path)]) == 0
    seq = json.loads((only_dir(tmp_path, "bootstrap") / "bootstrap.json").read_text())["bound_sequence"]
    assert abs(seq["a"][-1] - 2 / 3) < 1e-8 and abs(seq["b"][-1] - 2 / 3) < 1e-8


def test_bootstrap_inverted_bracket(tmp_path):
    assert main(["bootstrap", "--alpha", "0.5", "--delta", "2", "--a1", "2", "--b1", "1", "--out", str(tmp_path)]) == 2


def test_verify(tmp_path):
    assert main(["verify", "--delta", "3,4", "--alphas", "0.5,0.51,0.95", "--out", str(tmp_path)]) == 0
    checks = json.loads((only_dir(tmp_path, "verify") / "verify.json").read_text())["checks"]
    d3 = checks[0]
    assert d3["grid_check"] == {"delta": 3, "alpha_max_pass": 0.51}
    by_alpha = {r["alpha"]: r for r in d3["improvement"]}
    assert by_alpha[0.51]["all_pass"]
    assert not by_alpha[0.95]["all_pass"] and by_alpha[0.95]["witnesses"]
    d4_lower = {r["alpha"]: r for r in checks[1]["lower_threshold"]}
    assert d4_lower[0.5]["all_pass"] and d4_lower[0.5]["threshold"] == pytest.approx(0.125)


def test_verify_rerun_identical(tmp_path):
    for sub in ("a", "b"):
        assert main(["verify", "--delta", "2", "--alphas", "0.3", "--out", str(tmp_path / sub)]) == 0
    fa = only_dir(tmp_path / "a", "verify") / "verify.json"
    fb = only_dir(tmp_path / "b", "verify") / "verify.json"
    assert fa.read_bytes() == fb.read_bytes()
