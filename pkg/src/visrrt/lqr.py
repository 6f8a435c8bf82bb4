"""Discrete LQR and the safety-checked LQR steering rollout."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from visrrt import _kernels
from visrrt.dynamics import DEFAULT_LIMITS, DT, Limits, linearize
from visrrt.safety import DEFAULT_MARGIN, SensorSpec
from visrrt.world import WorldModel


class DareNotConverged(RuntimeError):
    pass


@dataclass
class LqrGain:
    K: np.ndarray
    P: np.ndarray
    Q: np.ndarray
    R: np.ndarray
    iterations: int = 0


def dare_residual(A, B, Q, R, P) -> float:
    BtP = B.T @ P
    rhs = Q + A.T @ P @ A - A.T @ P @ B @ np.linalg.solve(R + BtP @ B, BtP @ A)
    return float(np.max(np.abs(P - rhs)))


def solve_dare(A, B, Q, R, tol: float = 1e-10, max_iter: int = 10_000) -> LqrGain:
    """Riccati fixed-point iteration ``P <- Q + A'P(A - BK)``, then the gain."""
    A, B, Q, R = (np.atleast_2d(np.asarray(m, dtype=float)) for m in (A, B, Q, R))
    P = Q.copy()
    for it in range(1, max_iter + 1):
        BtP = B.T @ P
        K = np.linalg.solve(R + BtP @ B, BtP @ A)
        P_next = Q + A.T @ P @ (A - B @ K)
        P_next = 0.5 * (P_next + P_next.T)
        diff = np.max(np.abs(P_next - P))
        P = P_next
        if diff < tol:
            break
    else:
        raise DareNotConverged(f"Riccati iteration did not converge in {max_iter} steps")
    BtP = B.T @ P
    K = np.linalg.solve(R + BtP @ B, BtP @ A)
    return LqrGain(K=K, P=P, Q=Q, R=R, iterations=it)


@dataclass
class TrajectorySegment:
    """Rollout samples; ``controls[k]`` is applied from ``states[k]``."""

    states: np.ndarray
    controls: np.ndarray
    dt: float = DT
    t0: float = 0.0
    truncated: bool = False
    violation: str | None = None
    reached: bool = False

    def __len__(self):
        return len(self.states)

    @property
    def times(self) -> np.ndarray:
        return self.t0 + self.dt * np.arange(len(self.states))

    @property
    def end(self) -> np.ndarray:
        return self.states[-1]

    @property
    def arc_length(self) -> float:
        if len(self.states) < 2:
            return 0.0
        d = np.diff(self.states[:, :2], axis=0)
        return float(np.hypot(d[:, 0], d[:, 1]).sum())

    def prefix(self, n: int, violation: str | None) -> TrajectorySegment:
        return TrajectorySegment(
            self.states[:n].copy(), self.controls[:n].copy(), self.dt, self.t0,
            truncated=True, violation=violation, reached=False,
        )


@dataclass(frozen=True)
class SteerParams:
    q: tuple = (1.0, 1.0, 0.5, 0.1)
    r: tuple = (0.5, 0.5)
    max_horizon: int = 200
    dt: float = DT
    limits: Limits = DEFAULT_LIMITS
    gammas: tuple = (1.0, 1.0)
    # speed the gain is linearized at when the robot is slower than this;
    # at v = 0 the lateral position is not stabilizable
    v_floor: float = 0.5
    visibility: bool = True
    margin: float = DEFAULT_MARGIN
    tol: float = 1e-9


@lru_cache(maxsize=64)
def _gain(v_lin: float, dt: float, q: tuple, r: tuple) -> np.ndarray:
    A, B = linearize(np.array([0.0, 0.0, 0.0, v_lin]), np.zeros(2), dt)
    return solve_dare(A, B, np.diag(q), np.diag(r)).K


def steering_gain(v: float, params: SteerParams) -> np.ndarray:
    """LQR gain in the frame of the reference heading.

    The linearized unicycle is rotation invariant, so the gain for any
    reference heading is the heading-zero gain applied to the rotated error.
    The linearization speed is rounded up to a 0.1 m/s grid.
    """
    v_lin = min(max(v, params.v_floor), params.limits.v_max)
    v_lin = math.ceil(round(v_lin * 10.0, 9)) / 10.0
    return _gain(v_lin, params.dt, tuple(params.q), tuple(params.r))


def _limit_array(lim: Limits) -> np.ndarray:
    return np.array([lim.v_min, lim.v_max, lim.a_min, lim.a_max, lim.w_min, lim.w_max])


class Steerer:
    """LQR-CBF steering in a fixed environment.

    Every executed sample satisfies the collision barrier set conditions
    (psi_0, psi_1 >= 0) and its input satisfies psi_2 >= 0 for every known
    obstacle; with ``visibility`` on, every sample also has a non-negative
    visibility margin over the rest of the segment.
    """

    def __init__(self, world: WorldModel, sensor: SensorSpec, params: SteerParams = SteerParams()):
        self.world = world
        self.sensor = sensor
        self.params = params
        obs = world.obstacle_array(include_hidden=False)
        if len(obs):
            obs = obs.copy()
            obs[:, 2] += world.inflation
        self._obs = np.ascontiguousarray(obs.reshape(-1, 3))
        self._lim = _limit_array(params.limits)
        self._bounds = np.array(world.bounds, dtype=float)

    def steer(self, start, to, max_horizon: int | None = None, reach_tol: float | None = None) -> TrajectorySegment:
        p = self.params
        start = np.asarray(start, dtype=float)
        to = np.asarray(to, dtype=float)[:2]
        horizon = p.max_horizon if max_horizon is None else max_horizon
        tol = self.world.goal_tolerance if reach_tol is None else reach_tol
        theta_ref = math.atan2(to[1] - start[1], to[0] - start[0])
        K = steering_gain(start[3], p)
        states, controls, n, status, last = _kernels.rollout(
            start, to, theta_ref, K, p.dt, self._lim, self._bounds, self._obs,
            p.gammas[0], p.gammas[1], horizon, tol, p.tol,
        )
        seg = TrajectorySegment(states, controls, p.dt, reached=status == _kernels.REACHED)
        if status in (_kernels.STATE_VIOLATION, _kernels.INPUT_VIOLATION):
            kind = "collision"
            if status == _kernels.INPUT_VIOLATION and not self.input_feasible(last):
                kind = "input_bounds"
            seg = seg.prefix(n, kind)
        if p.visibility and len(seg):
            k = self.first_visibility_violation(seg.states)
            if k >= 0:
                seg = seg.prefix(k, "visibility")
        return seg

    def input_feasible(self, s) -> bool:
        """Whether any boxed input satisfies every psi_2 row at ``s``."""
        from visrrt.control import QpProblem, solve_qp
        from visrrt.barrier import eval_psi_series
        from visrrt.safety import collision_barrier_raw

        rows = []
        for cx, cy, rho in self._obs:
            ps = eval_psi_series(collision_barrier_raw(cx, cy, rho, self.params.gammas), s)
            rows.append((ps.c, ps.c0))
        lim = self.params.limits
        return solve_qp(QpProblem(np.zeros(2), rows, lim.u_low, lim.u_high)) is not None

    def first_visibility_violation(self, states, start: int = 0) -> int:
        lim = self.params.limits
        return int(_kernels.first_visibility_violation(
            np.ascontiguousarray(states, dtype=float), start, self.sensor.half_fov,
            self.sensor.range, lim.brake, self.params.margin,
        ))


def lqr_cbf_steer(start, to, world: WorldModel, sensor: SensorSpec, max_horizon: int = 200,
                  params: SteerParams = SteerParams()) -> TrajectorySegment:
    """Roll out LQR tracking from ``start`` toward the point ``to``.

    Returns the certified prefix; ``truncated`` and ``violation`` report why
    the rollout stopped early. An empty segment means even the first sample
    failed and the caller should discard the target.
    """
    return Steerer(world, sensor, params).steer(start, to, max_horizon)
