"""Closed-loop experiments with a limited field-of-view sensor.

The robot plans on the known obstacles, then tracks the plan while its
sensor sweeps a narrow cone. Everything the cone has ever covered forms
the local free set ``B_t``; hidden obstacles are revealed when their disk
enters the cone.
"""

from __future__ import annotations

import json
import logging
import math
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from visrrt.config import ExperimentConfig
from visrrt.control import cbf_qp_track, gatekeeper_commit, nominal_input
from visrrt.dynamics import step, wrap_angle
from visrrt.lqr import TrajectorySegment
from visrrt.planner import PlanResult, plan
from visrrt.safety import Footprint, SensorSpec, visible_mask
from visrrt.world import Obstacle, WorldModel, clearance, in_true_free_set

log = logging.getLogger(__name__)

OUTCOMES = ("reached_goal", "qp_infeasible", "collision", "replan_exhausted", "timeout")
GRID_THRESHOLD = 1000


class LocalFreeSet:
    """Union of every footprint sensed so far; append-only."""

    def __init__(self, spec: SensorSpec, cell: float | None = None):
        self.spec = spec
        self.footprints: list[Footprint] = []
        self._arr = np.zeros((0, 3))
        self._cell = cell or spec.range
        self._grid: dict | None = None

    def __len__(self):
        return len(self.footprints)

    def append(self, fp: Footprint):
        self.footprints.append(fp)
        self._arr = np.vstack([self._arr, [fp.position[0], fp.position[1], fp.heading]])
        if self._grid is not None:
            self._index(len(self.footprints) - 1)
        elif len(self.footprints) > GRID_THRESHOLD:
            self._grid = {}
            for i in range(len(self.footprints)):
                self._index(i)

    def _index(self, i: int):
        x, y, _ = self._arr[i]
        r = self.spec.range
        c = self._cell
        for gx in range(math.floor((x - r) / c), math.floor((x + r) / c) + 1):
            for gy in range(math.floor((y - r) / c), math.floor((y + r) / c) + 1):
                self._grid.setdefault((gx, gy), []).append(i)

    def _mask(self, pts: np.ndarray, arr: np.ndarray) -> np.ndarray:
        if len(arr) == 0:
            return np.zeros(len(pts), dtype=bool)
        dx = pts[:, None, 0] - arr[None, :, 0]
        dy = pts[:, None, 1] - arr[None, :, 1]
        dist = np.hypot(dx, dy)
        bearing = np.arctan2(dy, dx) - arr[None, :, 2]
        bearing = np.abs((bearing + np.pi) % (2 * np.pi) - np.pi)
        vis = (dist <= self.spec.range) & ((bearing <= self.spec.half_fov) | (dist == 0.0))
        return vis.any(axis=1)

    def contains(self, points) -> np.ndarray:
        pts = np.atleast_2d(np.asarray(points, dtype=float))[:, :2]
        if self._grid is None:
            return self._mask(pts, self._arr)
        out = np.zeros(len(pts), dtype=bool)
        keys = np.floor(pts / self._cell).astype(int)
        for key in {tuple(k) for k in keys}:
            sel = np.all(keys == key, axis=1)
            idx = self._grid.get(key)
            if idx:
                out[sel] = self._mask(pts[sel], self._arr[idx])
        return out

    def contains_point(self, p) -> bool:
        return bool(self.contains(np.asarray(p)[None, :2])[0])


def disk_detection_point(fp: Footprint, center, radius: float):
    """Closest point to the sensor of ``disk ∩ sector``, or ``None`` if they miss."""
    o = np.asarray(fp.position, dtype=float)
    c = np.asarray(center, dtype=float)
    R, half = fp.spec.range, fp.spec.half_fov
    oc = c - o
    dc = float(np.hypot(*oc))
    if dc <= radius:
        return o.copy()
    cands = []
    # nearest rim point, if the cone sees it
    q = c - radius * oc / dc
    if dc - radius <= R and abs(wrap_angle(math.atan2(oc[1], oc[0]) - fp.heading)) <= half:
        cands.append(q)
    # the two edges of the cone
    if half < math.pi:
        for sgn in (-1.0, 1.0):
            ang = fp.heading + sgn * half
            e = np.array([math.cos(ang), math.sin(ang)])
            b = float(e @ oc)
            disc = b * b - (dc * dc - radius * radius)
            if disc < 0:
                continue
            t1, t2 = b - math.sqrt(disc), b + math.sqrt(disc)
            t = max(t1, 0.0)
            if t <= min(t2, R):
                cands.append(o + t * e)
    # the far arc
    if abs(dc - R) <= radius <= dc + R:
        cosphi = (R * R + dc * dc - radius * radius) / (2 * R * dc)
        phi = math.acos(min(1.0, max(-1.0, cosphi)))
        base = math.atan2(oc[1], oc[0])
        for ang in (base - phi, base + phi, base):
            if abs(wrap_angle(ang - fp.heading)) <= half:
                p = o + R * np.array([math.cos(ang), math.sin(ang)])
                if np.hypot(*(p - c)) <= radius + 1e-12:
                    cands.append(p)
        d_lo, d_hi = wrap_angle(fp.heading - half - base), wrap_angle(fp.heading + half - base)
        for d in (d_lo, d_hi):
            if abs(d) <= phi:
                cands.append(o + R * np.array([math.cos(base + d), math.sin(base + d)]))
    if not cands:
        return None
    return min(cands, key=lambda p: float(np.hypot(*(p - o))))


def sense(s, world: WorldModel, spec: SensorSpec, bt: LocalFreeSet, detected: set | None = None):
    """Record the footprint at ``s`` and report newly revealed hidden obstacles.

    Returns ``(bt, detections)`` with detections as ``(obstacle_id, point)``.
    """
    fp = Footprint.at(s, spec)
    bt.append(fp)
    found = []
    for i, obs in enumerate(world.hidden_obstacles):
        if detected is not None and i in detected:
            continue
        p = disk_detection_point(fp, obs.center, obs.radius)
        if p is not None:
            found.append((i, p))
            if detected is not None:
                detected.add(i)
    return bt, found


class PathFollower:
    """Pure-pursuit target selection along a dense reference path.

    The closest-point index only moves forward, and only within ``window``
    metres of arc, so a path that doubles back is not short-cut.
    """

    def __init__(self, path, lookahead: float, window: float = 1.5):
        path = np.asarray(path, dtype=float)
        # samples where the reference turns on the spot collapse to one point
        keep = np.ones(len(path), dtype=bool)
        keep[:-1] = np.hypot(*np.diff(path[:, :2], axis=0).T) > 1e-9
        self.path = path[keep]
        self.arc = np.concatenate([[0.0], np.cumsum(np.hypot(*np.diff(self.path[:, :2], axis=0).T))])
        self.lookahead = lookahead
        self.window = window
        self.idx = 0

    def copy(self) -> PathFollower:
        other = PathFollower.__new__(PathFollower)
        other.__dict__.update(self.__dict__)
        return other

    def update(self, pos):
        """Return ``(target, goal_dist)`` for the robot at ``pos``."""
        end = int(np.searchsorted(self.arc, self.arc[self.idx] + self.window, side="right"))
        seg = self.path[self.idx : max(end, self.idx + 1), :2]
        d = np.hypot(seg[:, 0] - pos[0], seg[:, 1] - pos[1])
        self.idx += int(np.argmin(d))
        rest = self.path[self.idx :]
        far = np.flatnonzero(np.hypot(rest[:, 0] - pos[0], rest[:, 1] - pos[1]) >= self.lookahead)
        target = rest[far[0]] if len(far) else self.path[-1]
        goal_dist = float(np.hypot(*(self.path[-1, :2] - pos[:2])))
        return target, goal_dist


@dataclass
class RunMetrics:
    outcome: str
    path_length: float
    sim_time: float
    min_clearance: float
    detections: list = field(default_factory=list)  # (t, id, x, y)
    replans: int = 0
    backup_activations: int = 0
    # not serialized
    trajectory: np.ndarray | None = field(default=None, repr=False, compare=False)
    plans: list = field(default_factory=list, repr=False, compare=False)
    free_set: LocalFreeSet | None = field(default=None, repr=False, compare=False)
    in_free_set_before_step: list = field(default_factory=list, repr=False, compare=False)

    def __post_init__(self):
        if self.outcome not in OUTCOMES:
            raise ValueError(f"unknown outcome {self.outcome!r}")

    def to_json(self) -> dict:
        return {
            "outcome": self.outcome,
            "path_length": round(float(self.path_length), 9),
            "sim_time": round(float(self.sim_time), 9),
            "min_clearance": round(float(self.min_clearance), 9),
            "detections": [
                {"t": round(float(t), 9), "id": int(i), "x": round(float(x), 9), "y": round(float(y), 9)}
                for t, i, x, y in self.detections
            ],
            "replans": int(self.replans),
            "backup_activations": int(self.backup_activations),
        }

    @classmethod
    def from_json(cls, d: dict) -> RunMetrics:
        return cls(
            outcome=d["outcome"],
            path_length=d["path_length"],
            sim_time=d["sim_time"],
            min_clearance=d["min_clearance"],
            detections=[(e["t"], e["id"], e["x"], e["y"]) for e in d["detections"]],
            replans=d["replans"],
            backup_activations=d["backup_activations"],
        )


def write_metrics(metrics: RunMetrics, path):
    Path(path).write_text(json.dumps(metrics.to_json(), indent=2, sort_keys=True) + "\n", encoding="utf-8")


def read_metrics(path) -> RunMetrics:
    return RunMetrics.from_json(json.loads(Path(path).read_text(encoding="utf-8")))


def _inflated(obstacles, inflation: float) -> np.ndarray:
    if not obstacles:
        return np.zeros((0, 3))
    return np.array([[o.center[0], o.center[1], o.radius + inflation] for o in obstacles])


def nominal_rollout(s, follower: PathFollower, cfg: ExperimentConfig, steps: int) -> TrajectorySegment:
    """Obstacle-agnostic tracking of the reference for ``steps`` ticks."""
    f = follower.copy()
    lim, dt = cfg.limits, cfg.planner.steer.dt
    states, controls = [np.asarray(s, dtype=float)], []
    for _ in range(steps):
        target, gd = f.update(states[-1])
        u = np.clip(nominal_input(states[-1], target, cfg.gains, gd), lim.u_low, lim.u_high)
        controls.append(u)
        states.append(step(states[-1], u, dt, lim))
    controls.append(np.zeros(2))
    return TrajectorySegment(np.array(states), np.array(controls), dt)


def run_experiment(cfg: ExperimentConfig, controller: str = "cbf-qp", variant: str = "ours",
                   plan_result: PlanResult | None = None) -> RunMetrics:
    """Plan on the known obstacles, then track the plan in closed loop.

    ``controller`` is ``"cbf-qp"`` or ``"gatekeeper"``; ``variant`` is
    ``"ours"`` (visibility-aware planner) or ``"no-visibility"``.
    """
    if controller not in ("cbf-qp", "gatekeeper"):
        raise ValueError(f"unknown controller {controller!r}")
    if variant not in ("ours", "no-visibility"):
        raise ValueError(f"unknown variant {variant!r}")
    world = cfg.world
    params = replace(cfg.planner, visibility=(variant == "ours"))
    if plan_result is None:
        plan_result = plan(world.without_hidden(), cfg.sensor, params)
    plans = [plan_result]

    lim, dt = cfg.limits, cfg.planner.steer.dt
    inflation = world.inflation
    known = list(world.known_obstacles)
    detected: set[int] = set()
    bt = LocalFreeSet(cfg.sensor)
    s = np.asarray(world.start, dtype=float).copy()
    traj = [s.copy()]
    detections = []
    min_clear = clearance(s[:2], world, include_hidden=True) - world.robot_radius
    path_len, t = 0.0, 0.0
    replans, backups = 0, 0
    in_bt = []

    def metrics(outcome):
        return RunMetrics(outcome, path_len, t, min_clear, detections, replans, backups,
                          trajectory=np.array(traj), plans=plans, free_set=bt, in_free_set_before_step=in_bt)

    if not plan_result.success:
        return metrics("replan_exhausted")
    follower = PathFollower(plan_result.path, cfg.gains.lookahead)
    in_backup = False

    n_ticks = int(round(cfg.sim.timeout / dt))
    for _ in range(n_ticks):
        _, found = sense(s, world, cfg.sensor, bt, detected)
        for i, p in found:
            detections.append((t, i, float(p[0]), float(p[1])))
        if np.hypot(*(s[:2] - world.goal)) <= world.goal_tolerance:
            return metrics("reached_goal")
        obstacles = _inflated(known + [world.hidden_obstacles[i] for i in sorted(detected)], inflation)

        if controller == "cbf-qp":
            target, gd = follower.update(s)
            u = cbf_qp_track(s, target, obstacles, cfg.gains, lim, cfg.sim.gammas, gd)
            if u is None:
                return metrics("qp_infeasible")
        else:
            follower.update(s)
            nominal = nominal_rollout(s, follower, cfg, cfg.sim.nominal_horizon)
            decision = gatekeeper_commit(nominal, bt, cfg.sim.backup_decel, obstacles, lim)
            if decision.braking_now and not in_backup:
                backups += 1
            in_backup = decision.braking_now
            u = decision.committed.controls[0]
            if decision.replan_requested and s[3] <= 1e-6:
                replans += 1
                if replans > cfg.sim.replan_budget:
                    return metrics("replan_exhausted")
                log.info("replanning from %s (replan %d)", np.round(s, 3), replans)
                new_world = world.without_hidden().with_start(s).with_known(
                    [world.hidden_obstacles[i] for i in sorted(detected)])
                new_plan = plan(new_world, cfg.sensor, replace(params, seed=params.seed + replans))
                plans.append(new_plan)
                if not new_plan.success:
                    continue
                follower = PathFollower(new_plan.path, cfg.gains.lookahead)
                in_backup = False
                continue

        s_next = step(s, u, dt, lim)
        in_bt.append(bt.contains_point(s_next))
        path_len += float(np.hypot(*(s_next[:2] - s[:2])))
        s = s_next
        t += dt
        traj.append(s.copy())
        min_clear = min(min_clear, clearance(s[:2], world, include_hidden=True) - world.robot_radius)
        if not in_true_free_set(s, world):
            return metrics("collision")
    return metrics("timeout")
