import json
import subprocess
import sys

import numpy as np
import pytest

from visrrt.cli import load_suite, main, summarize
from visrrt.config import DATA_DIR, fixture, load_config, load_config_file
from visrrt.sim import OUTCOMES
from visrrt.world import ConfigError

SMALL = """
bounds = [0.0, -2.0, 5.0, 2.0]
start = [0.5, 0.0, 0.0, 0.0]
goal = [4.0, 0.0]
goal_tolerance = 0.25
robot_radius = 0.3
tracking_error = 0.1
obstacles = [[2.0, -1.2, 0.4]]
hidden = [[2.6, 0.8, 0.3]]

[planner]
max_iter = 300
seed = 0

[sim]
timeout = 40.0
"""


@pytest.fixture()
def env(tmp_path):
    p = tmp_path / "small.toml"
    p.write_text(SMALL)
    return p


def test_defaults_and_overrides():
    cfg = load_config(SMALL + """
[sensor]
fov_deg = 60.0
range = 2.5

[limits]
v_max = 0.8

[barrier]
gammas = [2.0, 3.0]

[visibility]
margin = 0.2

[control]
k_v = 1.5
backup_decel = 0.5
""")
    assert cfg.sensor.range == 2.5
    assert cfg.sensor.half_fov == pytest.approx(0.5235987756)
    assert cfg.limits.v_max == 0.8
    assert cfg.planner.steer.gammas == (2.0, 3.0) == cfg.sim.gammas
    assert cfg.planner.steer.margin == 0.2
    assert cfg.planner.max_iter == 300
    assert cfg.gains.k_v == 1.5 and cfg.gains.k_omega == 2.0
    assert cfg.sim.backup_decel == 0.5 and cfg.sim.timeout == 40.0


def test_unknown_keys_rejected():
    with pytest.raises(ConfigError):
        load_config(SMALL + "\n[control]\nkp = 1.0\n")
    with pytest.raises(ConfigError):
        load_config(SMALL + "\n[sensor]\nfov = 1.0\n")


def test_bad_gammas_rejected():
    with pytest.raises(ConfigError):
        load_config(SMALL + "\n[barrier]\ngammas = [1.0, -1.0]\n")


@pytest.mark.parametrize("name", ["env1", "env2"])
def test_bundled_fixtures_load(name):
    cfg = fixture(name)
    assert len(cfg.world.hidden_obstacles) >= 1
    again = load_config_file(f"{name}.toml").world
    assert again.known_obstacles == cfg.world.known_obstacles
    assert np.array_equal(again.start, cfg.world.start) and np.array_equal(again.goal, cfg.world.goal)


def test_bundled_suite():
    runs = load_suite(DATA_DIR / "figs.toml")
    envs = {r[0].split("/")[-1] for r in runs}
    assert envs == {"env1.toml", "env2.toml"}
    assert {r[1] for r in runs} == {"ours", "no-visibility"}


def test_cli_plan(env, tmp_path, capsys):
    out = tmp_path / "plan.json"
    svg = tmp_path / "plan.svg"
    assert main(["plan", "--env", str(env), "--out", str(out), "--svg", str(svg)]) == 0
    d = json.loads(out.read_text())
    assert set(d) == {"waypoints", "path", "cost", "iterations", "success", "tree_edges"}
    assert d["success"] and d["iterations"] == 300
    first = (out.read_bytes(), svg.read_bytes())
    assert main(["plan", "--env", str(env), "--out", str(out), "--svg", str(svg)]) == 0
    assert (out.read_bytes(), svg.read_bytes()) == first
    assert "ok:" in capsys.readouterr().out


def test_cli_plan_failure_exit_code(env, tmp_path):
    assert main(["plan", "--env", str(env), "--max-iter", "2", "--out", str(tmp_path / "p.json")]) == 1
    assert json.loads((tmp_path / "p.json").read_text())["cost"] is None


def test_cli_simulate_from_plan(env, tmp_path):
    pj = tmp_path / "plan.json"
    assert main(["plan", "--env", str(env), "--out", str(pj)]) == 0
    mj = tmp_path / "m.json"
    assert main(["simulate", "--env", str(env), "--controller", "gatekeeper", "--plan", str(pj),
                 "--out", str(mj), "--svg", str(tmp_path / "m.svg")]) == 0
    m = json.loads(mj.read_text())
    assert set(m) == {"outcome", "path_length", "sim_time", "min_clearance", "detections", "replans",
                      "backup_activations"}
    assert m["outcome"] in OUTCOMES
    assert [d["id"] for d in m["detections"]] == [0]
    assert (tmp_path / "m.svg").read_text().startswith("<svg")


def test_cli_bench(env, tmp_path):
    suite = tmp_path / "suite.toml"
    suite.write_text(f'[[run]]\nenv = "{env.name}"\nvariants = ["ours"]\ncontrollers = ["cbf-qp"]\nseeds = [0, 2]\n')
    out = tmp_path / "results"
    assert main(["bench", "--suite", str(suite), "--out", str(out), "--jobs", "1"]) == 0
    table = json.loads((out / "summary.json").read_text())
    assert len(table) == 1
    row = table[0]
    assert row["runs"] == 2 and 0.0 <= row["success_rate"] <= 1.0
    assert {"mean_path_length", "mean_replans"} <= set(row)
    assert len(list(out.glob("small_ours_cbf-qp_s*.json"))) == 2
    assert len(list(out.glob("*.svg"))) == 2
    assert "success" in (out / "summary.txt").read_text()


def test_summarize_groups_cells():
    m_ok = {"outcome": "reached_goal", "path_length": 4.0, "replans": 0}
    m_bad = {"outcome": "timeout", "path_length": 2.0, "replans": 2}
    t = summarize([("e", "ours", "cbf-qp", 0, m_ok), ("e", "ours", "cbf-qp", 1, m_bad),
                   ("e", "no-visibility", "cbf-qp", 0, m_bad)])
    cell = [r for r in t if r["variant"] == "ours"][0]
    assert cell["success_rate"] == 0.5 and cell["mean_path_length"] == 3.0 and cell["mean_replans"] == 1.0


def test_cli_errors(tmp_path, capsys):
    assert main(["plan", "--env", str(tmp_path / "missing.toml")]) == 2
    bad = tmp_path / "bad.toml"
    bad.write_text("bounds = [0, 0, 1]\n")
    assert main(["plan", "--env", str(bad)]) == 2
    assert "error" in capsys.readouterr().err
    with pytest.raises(SystemExit):
        main(["fly"])


def test_console_entry_point():
    r = subprocess.run([sys.executable, "-m", "visrrt.cli", "--help"], capture_output=True, text=True)
    assert r.returncode == 0
    for cmd in ("plan", "simulate", "bench"):
        assert cmd in r.stdout
