import xml.etree.ElementTree as ET

import numpy as np
import pytest

from visrrt.config import ExperimentConfig, SimParams
from visrrt.dynamics import make_state
from visrrt.planner import PlannerParams, plan
from visrrt.render import render_svg
from visrrt.safety import SensorSpec
from visrrt.sim import run_experiment
from visrrt.world import Obstacle, WorldModel

SENSOR = SensorSpec.from_degrees(45, 3.0)
NS = "{http://www.w3.org/2000/svg}"


@pytest.fixture(scope="module")
def run():
    w = WorldModel(bounds=(0, -2, 5, 2), start=make_state(0.5, 0, 0, 0), goal=np.array([4.0, 0.0]),
                   known_obstacles=(Obstacle((2.0, -1.2), 0.4),), hidden_obstacles=(Obstacle((2.6, 0.8), 0.3),),
                   goal_tolerance=0.25)
    cfg = ExperimentConfig(w, SENSOR, PlannerParams(max_iter=300, seed=0), sim=SimParams(timeout=40.0))
    m = run_experiment(cfg, "cbf-qp", "ours")
    return cfg, m


def classes(svg):
    root = ET.fromstring(svg)
    out = {}
    for el in root.iter():
        c = el.get("class")
        if c:
            out[c] = out.get(c, 0) + 1
    return out


def test_plan_only_svg(run):
    cfg, m = run
    p = m.plans[0]
    svg = render_svg(p, None, cfg.world)
    n = classes(svg)
    assert n["obstacle"] == 1 and n["hidden"] == 1
    assert n["edge"] == len(p.tree) - 1
    assert n["path"] == 1
    assert n["start"] == 1 and n["goal"] == 1 and n["bounds"] == 1
    assert "footprint" not in n and "executed" not in n


def test_run_svg_counts(run):
    cfg, m = run
    svg = render_svg(m.plans[0], m, cfg.world, footprint_stride=5)
    n = classes(svg)
    assert n["footprint"] == len(range(0, len(m.free_set), 5))
    assert n["executed"] == 1
    assert n.get("detection", 0) == len(m.detections) == 1


def test_svg_is_deterministic(run):
    cfg, m = run
    a = render_svg(m.plans[0], m, cfg.world)
    b = render_svg(m.plans[0], m, cfg.world)
    assert a == b
    # a fresh plan with the same seed renders to identical bytes
    again = plan(cfg.world.without_hidden(), cfg.sensor, cfg.planner)
    assert render_svg(again, None, cfg.world) == render_svg(m.plans[0], None, cfg.world)


def test_svg_header_and_colours(run):
    cfg, m = run
    root = ET.fromstring(render_svg(m.plans[0], m, cfg.world, scale=50))
    assert root.tag == NS + "svg"
    assert root.get("width") == "250.000" and root.get("height") == "200.000"
    fills = {el.get("class"): el.get("fill") for el in root.iter() if el.get("class")}
    assert fills["obstacle"] == "black" and fills["hidden"] == "orange"
    assert fills["start"] == "blue" and fills["goal"] == "yellow"
    strokes = {el.get("class"): el.get("stroke") for el in root.iter() if el.get("class")}
    assert strokes["edge"] == "green" and strokes["path"] == "red"


def test_failed_plan_has_no_path(run):
    cfg, _ = run
    p = plan(cfg.world, cfg.sensor, PlannerParams(max_iter=2, seed=0))
    assert not p.success
    assert "path" not in classes(render_svg(p, None, cfg.world))


def test_world_required(run):
    _, m = run
    with pytest.raises(ValueError):
        render_svg(m.plans[0], m, None)
