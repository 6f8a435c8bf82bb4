"""Collision barrier, sensor footprint geometry and the visibility constraint."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from visrrt.barrier import BarrierSpec, ClassK
from visrrt.dynamics import wrap_angle
from visrrt.world import Obstacle, WorldModel

DEFAULT_MARGIN = 0.1


@dataclass(frozen=True)
class SensorSpec:
    fov: float  # full cone angle, rad
    range: float  # m

    def __post_init__(self):
        if not 0 < self.fov <= 2 * math.pi:
            raise ValueError("fov must be in (0, 2*pi]")
        if not self.range > 0:
            raise ValueError("sensing range must be positive")

    @classmethod
    def from_degrees(cls, fov_deg: float = 45.0, range: float = 3.0) -> SensorSpec:
        return cls(math.radians(fov_deg), range)

    @property
    def half_fov(self) -> float:
        return 0.5 * self.fov


@dataclass(frozen=True)
class Footprint:
    """Closed circular sector seen from one pose."""

    position: tuple[float, float]
    heading: float
    spec: SensorSpec

    @classmethod
    def at(cls, s, spec: SensorSpec) -> Footprint:
        return cls((float(s[0]), float(s[1])), float(s[2]), spec)


@dataclass(frozen=True)
class CriticalPoint:
    point: np.ndarray
    arc_index: int
    fully_visible: bool


def collision_barrier(obs: Obstacle, world: WorldModel, gammas=(1.0, 1.0)) -> BarrierSpec:
    """Relative-degree-2 barrier keeping the robot outside an inflated disk.

    ``h = |p - c|^2 - rho^2`` with ``rho`` the obstacle radius grown by the
    robot radius and the tracking error.
    """
    cx, cy = obs.center
    rho = obs.radius + world.inflation
    return collision_barrier_raw(cx, cy, rho, gammas)


def collision_barrier_raw(cx: float, cy: float, rho: float, gammas=(1.0, 1.0)) -> BarrierSpec:
    def jet(s):
        x, y, th, v = s
        dx, dy = x - cx, y - cy
        c, sn = math.cos(th), math.sin(th)
        along = dx * c + dy * sn
        across = -dx * sn + dy * c
        h = dx * dx + dy * dy - rho * rho
        lf = np.array([h, 2.0 * v * along, 2.0 * v * v])
        # input columns are (a, omega)
        lg = np.array([[0.0, 0.0], [2.0 * along, 2.0 * v * across]])
        return lf, lg

    return BarrierSpec(jet, 2, tuple(ClassK(g) for g in gammas), name=f"collision({cx:g},{cy:g})")


def point_visible(fp: Footprint, p) -> bool:
    dx, dy = p[0] - fp.position[0], p[1] - fp.position[1]
    d = math.hypot(dx, dy)
    if d > fp.spec.range:
        return False
    if d == 0.0:
        return True
    return abs(wrap_angle(math.atan2(dy, dx) - fp.heading)) <= fp.spec.half_fov


def visible_mask(position, heading: float, spec: SensorSpec, points) -> np.ndarray:
    """Vectorized :func:`point_visible` for rows of ``points``."""
    pts = np.atleast_2d(np.asarray(points, dtype=float))[:, :2]
    d = pts - np.asarray(position, dtype=float)[:2]
    dist = np.hypot(d[:, 0], d[:, 1])
    bearing = np.arctan2(d[:, 1], d[:, 0]) - heading
    bearing = np.abs((bearing + np.pi) % (2 * np.pi) - np.pi)
    return (dist <= spec.range) & ((bearing <= spec.half_fov) | (dist == 0.0))


def _states(traj) -> np.ndarray:
    return np.atleast_2d(np.asarray(getattr(traj, "states", traj), dtype=float))


def critical_point(traj, fp: Footprint) -> CriticalPoint:
    """First sample of ``traj`` that ``fp`` does not cover."""
    states = _states(traj)
    if len(states) == 0:
        raise ValueError("empty trajectory")
    for j, s in enumerate(states):
        if not point_visible(fp, s[:2]):
            return CriticalPoint(states[j, :2].copy(), j, False)
    return CriticalPoint(states[-1, :2].copy(), len(states) - 1, True)


def braking_distance(v: float, brake: float) -> float:
    return v * v / (2.0 * brake)


def arc_lengths(states) -> np.ndarray:
    p = _states(states)[:, :2]
    seg = np.hypot(*np.diff(p, axis=0).T) if len(p) > 1 else np.zeros(0)
    return np.concatenate([[0.0], np.cumsum(seg)])


def visibility_constraint(
    k: int, traj, spec: SensorSpec, a_max: float, margin: float = DEFAULT_MARGIN
) -> float:
    """Visibility margin at sample ``k`` of ``traj``; safe when ``>= 0``.

    The robot must be able to see the stretch of its own path that it
    would cover while braking, plus ``margin``. Two terms, combined by min:

    * range: ``R_s - d_brake(v) - margin``
    * cone: ``fov/2`` minus the largest bearing, from the pose at ``k``, of
      any later sample within arc length ``d_brake + margin``.

    A non-negative value implies every sample in that stretch is inside
    the current footprint, so the first unseen sample lies strictly
    beyond the braking distance.
    """
    states = _states(traj)
    s = states[k]
    lookahead = braking_distance(s[3], a_max) + margin
    h_range = spec.range - lookahead

    x0, y0, th = s[0], s[1], s[2]
    arc = 0.0
    worst = 0.0
    px, py = x0, y0
    for j in range(k + 1, len(states)):
        qx, qy = states[j, 0], states[j, 1]
        arc += math.hypot(qx - px, qy - py)
        if arc > lookahead:
            break
        px, py = qx, qy
        dx, dy = qx - x0, qy - y0
        if dx * dx + dy * dy <= 1e-18:
            continue
        worst = max(worst, abs(wrap_angle(math.atan2(dy, dx) - th)))
    h_fov = spec.half_fov - worst
    return min(h_range, h_fov)
