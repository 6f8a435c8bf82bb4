"""Acceleration-driven unicycle.

State ``s = (x, y, theta, v)``, input ``u = (a, omega)``::

    x' = v cos(theta),  y' = v sin(theta),  theta' = omega,  v' = a

which is control-affine, ``s' = f(s) + g(s) u``. Position has relative
degree two with respect to the input, which is what the collision barrier
relies on.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

STATE_DIM = 4
CONTROL_DIM = 2
DT = 0.05


@dataclass(frozen=True)
class Limits:
    v_min: float = 0.0
    v_max: float = 1.0
    a_min: float = -1.0
    a_max: float = 1.0
    w_min: float = -1.0
    w_max: float = 1.0

    @property
    def u_low(self) -> np.ndarray:
        return np.array([self.a_min, self.w_min])

    @property
    def u_high(self) -> np.ndarray:
        return np.array([self.a_max, self.w_max])

    @property
    def brake(self) -> float:
        """Magnitude of the strongest deceleration."""
        return -self.a_min


DEFAULT_LIMITS = Limits()


def make_state(x=0.0, y=0.0, theta=0.0, v=0.0) -> np.ndarray:
    return np.array([x, y, wrap_angle(theta), v], dtype=float)


def wrap_angle(a: float) -> float:
    """Wrap to (-pi, pi]."""
    w = math.remainder(a, 2.0 * math.pi)
    return math.pi if w == -math.pi else w


def affine_fields(s):
    """Drift ``f(s)`` and actuation matrix ``g(s)``."""
    _, _, th, v = s
    f = np.array([v * math.cos(th), v * math.sin(th), 0.0, 0.0])
    g = np.array([[0.0, 0.0], [0.0, 0.0], [0.0, 1.0], [1.0, 0.0]])
    return f, g


def vector_field(s, u) -> np.ndarray:
    f, g = affine_fields(s)
    return f + g @ np.asarray(u, dtype=float)


def clamp_control(u, limits: Limits = DEFAULT_LIMITS):
    """Project ``u`` onto the input box; also report whether it moved."""
    a = min(max(u[0], limits.a_min), limits.a_max)
    w = min(max(u[1], limits.w_min), limits.w_max)
    return np.array([a, w]), bool(a != u[0] or w != u[1])


def _rk4(x, y, th, v, a, w, dt):
    # Hand-unrolled: called for every tick of every rollout.
    k1x, k1y = v * math.cos(th), v * math.sin(th)
    v2, th2 = v + 0.5 * dt * a, th + 0.5 * dt * w
    k2x, k2y = v2 * math.cos(th2), v2 * math.sin(th2)
    k3x, k3y = k2x, k2y  # theta and v are independent of position
    v4, th4 = v + dt * a, th + dt * w
    k4x, k4y = v4 * math.cos(th4), v4 * math.sin(th4)
    x += dt / 6.0 * (k1x + 2 * k2x + 2 * k3x + k4x)
    y += dt / 6.0 * (k1y + 2 * k2y + 2 * k3y + k4y)
    return x, y, th + dt * w, v + dt * a


def step(s, u, dt: float = DT, limits: Limits | None = DEFAULT_LIMITS) -> np.ndarray:
    """One RK4 step with the input held constant.

    With ``limits`` the input is clamped to the box first and the speed is
    clamped afterwards; ``limits=None`` integrates the raw vector field.
    """
    if dt <= 0:
        raise ValueError("dt must be positive")
    if limits is not None:
        u, _ = clamp_control(u, limits)
    x, y, th, v = _rk4(float(s[0]), float(s[1]), float(s[2]), float(s[3]), float(u[0]), float(u[1]), dt)
    if limits is not None:
        v = min(max(v, limits.v_min), limits.v_max)
    return np.array([x, y, wrap_angle(th), v])


def rollout(s, controls, dt: float = DT, limits: Limits | None = DEFAULT_LIMITS) -> np.ndarray:
    out = [np.asarray(s, dtype=float)]
    for u in controls:
        out.append(step(out[-1], u, dt, limits))
    return np.array(out)


def jacobians(s, u):
    """Continuous-time Jacobians of ``f(s) + g(s) u``."""
    _, _, th, v = s
    c, sn = math.cos(th), math.sin(th)
    A = np.zeros((4, 4))
    A[0, 2], A[0, 3] = -v * sn, c
    A[1, 2], A[1, 3] = v * c, sn
    B = np.array([[0.0, 0.0], [0.0, 0.0], [0.0, 1.0], [1.0, 0.0]])
    return A, B


def linearize(s, u, dt: float = DT):
    """Euler-discretized Jacobians ``(I + A dt, B dt)``."""
    A, B = jacobians(s, u)
    return np.eye(4) + A * dt, B * dt
