"""Environment model: bounds, circular obstacles, start/goal and robot size."""

from __future__ import annotations

import sys
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

# Returned by clearance() when there is nothing to be close to.
NO_OBSTACLE_CLEARANCE = float(np.finfo(float).max)


class ConfigError(ValueError):
    """Raised when an environment file cannot be parsed or is inconsistent."""


@dataclass(frozen=True)
class Obstacle:
    center: tuple[float, float]
    radius: float

    def __post_init__(self):
        if not self.radius > 0:
            raise ConfigError(f"obstacle radius must be positive, got {self.radius}")
        object.__setattr__(self, "center", (float(self.center[0]), float(self.center[1])))
        object.__setattr__(self, "radius", float(self.radius))


@dataclass(frozen=True)
class WorldModel:
    bounds: tuple[float, float, float, float]
    start: np.ndarray
    goal: np.ndarray
    known_obstacles: tuple[Obstacle, ...] = ()
    hidden_obstacles: tuple[Obstacle, ...] = ()
    goal_tolerance: float = 0.25
    robot_radius: float = 0.3
    tracking_error: float = 0.1
    name: str = field(default="world", compare=False)

    @property
    def inflation(self) -> float:
        """Distance added to every obstacle radius by the collision barrier."""
        return self.robot_radius + self.tracking_error

    def in_bounds(self, p) -> bool:
        xmin, ymin, xmax, ymax = self.bounds
        return bool(xmin <= p[0] <= xmax and ymin <= p[1] <= ymax)

    def without_hidden(self) -> WorldModel:
        """Copy the planner is allowed to see."""
        return replace(self, hidden_obstacles=())

    def with_known(self, extra) -> WorldModel:
        return replace(self, known_obstacles=tuple(self.known_obstacles) + tuple(extra))

    def with_start(self, start) -> WorldModel:
        return replace(self, start=np.asarray(start, dtype=float).copy())

    def obstacle_array(self, include_hidden: bool = False) -> np.ndarray:
        """Obstacles as rows ``(cx, cy, r)``."""
        obs = list(self.known_obstacles)
        if include_hidden:
            obs += list(self.hidden_obstacles)
        if not obs:
            return np.zeros((0, 3))
        return np.array([[o.center[0], o.center[1], o.radius] for o in obs], dtype=float)


def clearance(p, world: WorldModel, include_hidden: bool = False) -> float:
    """Signed distance from ``p`` to the nearest obstacle surface."""
    obs = world.obstacle_array(include_hidden)
    if len(obs) == 0:
        return NO_OBSTACLE_CLEARANCE
    d = np.hypot(obs[:, 0] - p[0], obs[:, 1] - p[1]) - obs[:, 2]
    return float(d.min())


def in_true_free_set(s, world: WorldModel) -> bool:
    """Membership of the robot disk in the true collision-free set.

    Both known and hidden obstacles count. The set is closed: touching the
    robot-radius boundary exactly is still free.
    """
    if not world.in_bounds(s):
        return False
    return clearance(s[:2], world, include_hidden=True) >= world.robot_radius


def _obstacles(rows, key) -> tuple[Obstacle, ...]:
    out = []
    for row in rows or []:
        if len(row) != 3:
            raise ConfigError(f"{key}: expected [cx, cy, r], got {row!r}")
        out.append(Obstacle((row[0], row[1]), row[2]))
    return tuple(out)


def world_from_dict(cfg: dict, name: str = "world") -> WorldModel:
    try:
        bounds = tuple(float(b) for b in cfg["bounds"])
        start = np.asarray(cfg["start"], dtype=float)
        goal = np.asarray(cfg["goal"], dtype=float)
        goal_tol = float(cfg["goal_tolerance"])
        robot_radius = float(cfg["robot_radius"])
        tracking_error = float(cfg.get("tracking_error", 0.0))
    except KeyError as exc:
        raise ConfigError(f"missing field {exc.args[0]!r}") from None
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc)) from None
    if len(bounds) != 4 or bounds[0] >= bounds[2] or bounds[1] >= bounds[3]:
        raise ConfigError(f"bounds must be [xmin, ymin, xmax, ymax], got {bounds}")
    if start.shape != (4,):
        raise ConfigError("start must be [x, y, theta, v]")
    if goal.shape != (2,):
        raise ConfigError("goal must be [x, y]")
    if goal_tol <= 0:
        raise ConfigError("goal_tolerance must be positive")
    if robot_radius <= 0:
        raise ConfigError("robot_radius must be positive")
    if tracking_error < 0:
        raise ConfigError("tracking_error must be non-negative")

    world = WorldModel(
        bounds=bounds,
        start=start,
        goal=goal,
        known_obstacles=_obstacles(cfg.get("obstacles"), "obstacles"),
        hidden_obstacles=_obstacles(cfg.get("hidden"), "hidden"),
        goal_tolerance=goal_tol,
        robot_radius=robot_radius,
        tracking_error=tracking_error,
        name=name,
    )
    if not world.in_bounds(goal):
        raise ConfigError(f"goal {goal.tolist()} outside bounds {bounds}")
    if not world.in_bounds(start):
        raise ConfigError(f"start {start[:2].tolist()} outside bounds {bounds}")
    if clearance(start[:2], world) < world.inflation:
        raise ConfigError("start collides with a known obstacle (inflated by robot radius + tracking error)")
    return world


def parse_config(config_text: str) -> dict:
    try:
        return tomllib.loads(config_text)
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"cannot parse environment file: {exc}") from None


def load_world(config_text: str, name: str = "world") -> WorldModel:
    return world_from_dict(parse_config(config_text), name=name)


def load_world_file(path) -> WorldModel:
    path = Path(path)
    return load_world(path.read_text(encoding="utf-8"), name=path.stem)
