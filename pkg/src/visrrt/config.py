"""Experiment configuration: one TOML file per environment.

Top-level keys describe the world (see :mod:`visrrt.world`); optional
tables override the defaults of the other components::

    [sensor]      fov_deg, range
    [limits]      v_min, v_max, a_min, a_max, w_min, w_max
    [barrier]     gammas
    [visibility]  margin
    [planner]     max_iter, step_len, neighbor_radius, goal_bias, seed,
                  max_neighbors, rewire_subtree_cap, q, r, max_horizon, v_floor
    [control]     k_v, k_omega, v_cruise, lookahead, backup_decel, nominal_horizon
    [sim]         timeout, replan_budget
"""

from __future__ import annotations

from dataclasses import dataclass, field, fields, replace
from pathlib import Path

from visrrt.control import TrackerGains
from visrrt.dynamics import Limits
from visrrt.lqr import SteerParams
from visrrt.planner import PlannerParams
from visrrt.safety import DEFAULT_MARGIN, SensorSpec
from visrrt.world import ConfigError, WorldModel, parse_config, world_from_dict

DATA_DIR = Path(__file__).parent / "data"


@dataclass(frozen=True)
class SimParams:
    timeout: float = 120.0
    replan_budget: int = 5
    backup_decel: float = 1.0
    nominal_horizon: int = 40  # ticks
    gammas: tuple = (1.0, 1.0)


@dataclass(frozen=True)
class ExperimentConfig:
    world: WorldModel
    sensor: SensorSpec = field(default_factory=SensorSpec.from_degrees)
    planner: PlannerParams = field(default_factory=PlannerParams)
    gains: TrackerGains = field(default_factory=TrackerGains)
    sim: SimParams = field(default_factory=SimParams)

    @property
    def limits(self) -> Limits:
        return self.planner.steer.limits


def _pick(cls, table: dict, section: str, **extra):
    names = {f.name for f in fields(cls)}
    unknown = set(table) - names
    if unknown:
        raise ConfigError(f"[{section}] unknown keys: {sorted(unknown)}")
    kw = {k: tuple(v) if isinstance(v, list) else v for k, v in table.items()}
    kw.update(extra)
    return cls(**kw)


def config_from_dict(cfg: dict, name: str = "world") -> ExperimentConfig:
    world = world_from_dict(cfg, name=name)
    sensor_t = dict(cfg.get("sensor", {}))
    sensor = SensorSpec.from_degrees(float(sensor_t.pop("fov_deg", 45.0)), float(sensor_t.pop("range", 3.0)))
    if sensor_t:
        raise ConfigError(f"[sensor] unknown keys: {sorted(sensor_t)}")
    limits = _pick(Limits, cfg.get("limits", {}), "limits")
    gammas = tuple(cfg.get("barrier", {}).get("gammas", (1.0, 1.0)))
    if len(gammas) != 2 or min(gammas) <= 0:
        raise ConfigError("[barrier] gammas must be two positive gains")
    margin = float(cfg.get("visibility", {}).get("margin", DEFAULT_MARGIN))

    planner_t = dict(cfg.get("planner", {}))
    steer_keys = {f.name for f in fields(SteerParams)}
    steer_t = {k: planner_t.pop(k) for k in list(planner_t) if k in steer_keys}
    steer = _pick(SteerParams, steer_t, "planner", limits=limits, gammas=gammas, margin=margin)
    planner = _pick(PlannerParams, planner_t, "planner", steer=steer)

    control_t = dict(cfg.get("control", {}))
    sim_t = dict(cfg.get("sim", {}))
    for key in ("backup_decel", "nominal_horizon"):
        if key in control_t:
            sim_t[key] = control_t.pop(key)
    gains = _pick(TrackerGains, control_t, "control")
    sim = _pick(SimParams, sim_t, "sim", gammas=gammas)
    return ExperimentConfig(world, sensor, planner, gains, sim)


def load_config(config_text: str, name: str = "world") -> ExperimentConfig:
    return config_from_dict(parse_config(config_text), name=name)


def load_config_file(path) -> ExperimentConfig:
    path = Path(path)
    if not path.exists() and (DATA_DIR / path.name).exists():
        path = DATA_DIR / path.name
    return load_config(path.read_text(encoding="utf-8"), name=path.stem)


def fixture(name: str) -> ExperimentConfig:
    """Bundled environment, e.g. ``fixture("env1")``."""
    return load_config_file(DATA_DIR / f"{name}.toml")


def with_planner(cfg: ExperimentConfig, **kw) -> ExperimentConfig:
    return replace(cfg, planner=replace(cfg.planner, **kw))
