"""Tracking controllers: the CBF-QP safety filter and a gatekeeper filter."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from visrrt.dynamics import DEFAULT_LIMITS, DT, Limits, step, wrap_angle
from visrrt.lqr import TrajectorySegment

FEAS_TOL = 1e-9


@dataclass
class QpProblem:
    """``min |u - u_nom|^2`` s.t. ``c @ u + c0 >= 0`` for every row, ``lo <= u <= hi``."""

    u_nom: np.ndarray
    constraints: list
    lo: np.ndarray
    hi: np.ndarray

    def __post_init__(self):
        self.u_nom = np.asarray(self.u_nom, dtype=float)
        self.lo = np.asarray(self.lo, dtype=float)
        self.hi = np.asarray(self.hi, dtype=float)
        if np.any(self.lo > self.hi):
            raise ValueError("empty input box")

    def halfplanes(self) -> tuple[np.ndarray, np.ndarray]:
        """All rows, box included, as ``(C, c0)`` with ``C @ u + c0 >= 0``."""
        rows = [np.asarray(c, dtype=float) for c, _ in self.constraints]
        offs = [float(c0) for _, c0 in self.constraints]
        eye = np.eye(2)
        for i in range(2):
            rows += [eye[i], -eye[i]]
            offs += [-self.lo[i], self.hi[i]]
        return np.array(rows).reshape(-1, 2), np.array(offs)


def _feasible(C, c0, u) -> bool:
    scale = np.maximum(1.0, np.abs(C).sum(axis=1))
    return bool(np.all(C @ u + c0 >= -FEAS_TOL * scale))


def solve_qp(p: QpProblem):
    """Exact minimizer by enumerating the candidates of a 2-D polygon.

    The optimum is the nominal input itself, a projection onto one
    constraint line, or a vertex where two lines cross; every feasible
    candidate is scored and the best kept. Returns ``None`` when the
    feasible set is empty.
    """
    C, c0 = p.halfplanes()
    norms = np.hypot(C[:, 0], C[:, 1])
    degenerate = norms < 1e-14
    if np.any(c0[degenerate] < -FEAS_TOL):
        return None
    C, c0 = C[~degenerate], c0[~degenerate]

    u_nom = p.u_nom
    if _feasible(C, c0, u_nom):
        return u_nom.copy()

    # projections of u_nom onto every line
    proj = u_nom - ((C @ u_nom + c0) / np.sum(C * C, axis=1))[:, None] * C
    # pairwise intersections, by Cramer's rule
    i, j = np.triu_indices(len(C), 1)
    det = C[i, 0] * C[j, 1] - C[i, 1] * C[j, 0]
    ok = np.abs(det) >= 1e-12 * norms[i] * norms[j]
    i, j, det = i[ok], j[ok], det[ok]
    vx = (-c0[i] * C[j, 1] + c0[j] * C[i, 1]) / det
    vy = (-C[i, 0] * c0[j] + C[j, 0] * c0[i]) / det
    cands = np.vstack([proj, np.column_stack([vx, vy])])

    scale = np.maximum(1.0, np.abs(C).sum(axis=1))
    feas = np.all(cands @ C.T + c0 >= -FEAS_TOL * scale, axis=1)
    if not feas.any():
        return None
    cands = cands[feas]
    cost = np.sum((cands - u_nom) ** 2, axis=1)
    # first minimum in candidate order: projections before vertices
    return cands[int(np.argmin(cost))].copy()


@dataclass(frozen=True)
class TrackerGains:
    k_v: float = 1.0
    k_omega: float = 2.0
    v_cruise: float = 1.0
    lookahead: float = 0.6
    # a 4-vector waypoint carries a reference speed; follow it, but never below this
    v_min: float = 0.2


def nominal_input(s, waypoint, gains: TrackerGains = TrackerGains(), goal_dist: float = math.inf) -> np.ndarray:
    """Proportional heading/speed law toward ``waypoint``.

    The speed set-point is the cruise speed (or the waypoint's reference
    speed, if it has one), shrunk with the heading error and near the goal.
    """
    err = wrap_angle(math.atan2(waypoint[1] - s[1], waypoint[0] - s[0]) - s[2])
    v_set = gains.v_cruise
    if len(waypoint) >= 4:
        v_set = min(v_set, max(float(waypoint[3]), gains.v_min))
    v_des = v_set * max(0.0, math.cos(err))
    v_des = min(v_des, goal_dist)
    return np.array([gains.k_v * (v_des - s[3]), gains.k_omega * err])


def collision_rows(s, obstacles, gammas=(1.0, 1.0)) -> list:
    """One ``psi_2`` half-plane per obstacle row ``(cx, cy, rho)``."""
    x, y, th, v = s
    c, sn = math.cos(th), math.sin(th)
    g1, g2 = gammas
    rows = []
    for cx, cy, rho in np.atleast_2d(obstacles).reshape(-1, 3):
        dx, dy = x - cx, y - cy
        along = dx * c + dy * sn
        across = -dx * sn + dy * c
        h = dx * dx + dy * dy - rho * rho
        lfh = 2.0 * v * along
        c0 = 2.0 * v * v + (g1 + g2) * lfh + g1 * g2 * h
        rows.append((np.array([2.0 * along, 2.0 * v * across]), c0))
    return rows


def cbf_qp_track(s, waypoint, obstacles, gains: TrackerGains = TrackerGains(), limits: Limits = DEFAULT_LIMITS,
                 gammas=(1.0, 1.0), goal_dist: float = math.inf):
    """Safety-filtered tracking input, or ``None`` when the QP is infeasible.

    ``obstacles`` holds rows ``(cx, cy, rho)`` with ``rho`` already grown by
    the robot radius and tracking error.
    """
    u_nom = nominal_input(s, waypoint, gains, goal_dist)
    rows = collision_rows(s, obstacles, gammas) if len(obstacles) else []
    return solve_qp(QpProblem(u_nom, rows, limits.u_low, limits.u_high))


@dataclass
class CommitDecision:
    committed: TrajectorySegment
    used_backup: bool
    replan_requested: bool
    prefix_len: int = 0

    @property
    def braking_now(self) -> bool:
        """The first committed input already belongs to the backup."""
        return self.used_backup and self.prefix_len <= 1


def braking_trajectory(s, decel: float, dt: float = DT, limits: Limits = DEFAULT_LIMITS, max_steps: int = 10_000):
    """Straight-line stop at constant deceleration; ends at ``v = 0``."""
    states, controls = [np.asarray(s, dtype=float)], []
    u = np.array([-decel, 0.0])
    for _ in range(max_steps):
        if states[-1][3] <= 0.0:
            break
        controls.append(u)
        states.append(step(states[-1], u, dt, limits))
    controls.append(np.zeros(2))
    return np.array(states), np.array(controls)


def _clear(points, obstacles) -> np.ndarray:
    if obstacles is None or len(obstacles) == 0:
        return np.ones(len(points), dtype=bool)
    obs = np.atleast_2d(obstacles)
    d = np.hypot(points[:, None, 0] - obs[None, :, 0], points[:, None, 1] - obs[None, :, 1])
    return np.all(d >= obs[None, :, 2], axis=1)


def gatekeeper_commit(nominal: TrajectorySegment, bt, backup_decel: float, obstacles=None,
                      limits: Limits = DEFAULT_LIMITS, progress_threshold: float = 0.01) -> CommitDecision:
    """Longest safe prefix of ``nominal`` followed by a braking backup.

    A prefix ending at sample ``k`` is safe when samples ``0..k`` and the
    stop started from sample ``k`` all lie in the known free set ``bt``
    (any object with ``contains(points) -> bool mask``) and clear of the
    ``obstacles`` rows ``(cx, cy, rho)``. Replanning is requested when no
    prefix is safe or the safe prefix makes less than
    ``progress_threshold`` metres of progress.
    """
    states, dt = nominal.states, nominal.dt
    ok = bt.contains(states[:, :2]) & _clear(states[:, :2], obstacles)
    first_bad = int(np.argmin(ok)) if not ok.all() else len(states)

    for k in range(first_bad - 1, -1, -1):
        brake_states, brake_controls = braking_trajectory(states[k], backup_decel, dt, limits)
        pts = brake_states[:, :2]
        if not (bt.contains(pts).all() and _clear(pts, obstacles).all()):
            continue
        if k == len(states) - 1:
            return CommitDecision(nominal, used_backup=False, replan_requested=False, prefix_len=k + 1)
        committed = TrajectorySegment(
            np.vstack([states[:k], brake_states]),
            np.vstack([nominal.controls[:k], brake_controls]),
            dt, nominal.t0,
        )
        progress = float(np.hypot(*(states[k, :2] - states[0, :2])))
        return CommitDecision(committed, True, progress < progress_threshold, prefix_len=k + 1)

    brake_states, brake_controls = braking_trajectory(states[0], backup_decel, dt, limits)
    return CommitDecision(TrajectorySegment(brake_states, brake_controls, dt, nominal.t0), True, True, 0)
