"""Compiled inner loops for the steering rollout and the visibility scan.

These duplicate, in closed form, the collision barrier of
:mod:`visrrt.safety` and the visibility margin; the planner calls them a
few hundred thousand times per run. The pure-Python versions stay the
reference used by the re-scan checks.
"""

import math

import numpy as np
from numba import njit

REACHED = 0
HORIZON = 1
STATE_VIOLATION = 2
INPUT_VIOLATION = 3


@njit(cache=True)
def _wrap(a):
    two_pi = 2.0 * math.pi
    w = a - two_pi * np.round(a / two_pi)
    if w <= -math.pi:
        w += two_pi
    elif w > math.pi:
        w -= two_pi
    return w


@njit(cache=True)
def rollout(x0, target, theta_ref, K, dt, lim, bounds, obs, g1, g2, max_horizon, reach_tol, tol):
    """LQR rollout checked against every collision barrier.

    ``lim`` = (v_min, v_max, a_min, a_max, w_min, w_max); ``obs`` rows are
    (cx, cy, rho). Returns (states, controls, n, status, last) with ``last``
    the state at which the loop stopped.
    """
    states = np.empty((max_horizon + 1, 4))
    controls = np.empty((max_horizon + 1, 2))
    ct, st = math.cos(theta_ref), math.sin(theta_ref)
    x, y, th, v = x0[0], x0[1], x0[2], x0[3]
    n = 0
    status = HORIZON
    for k in range(max_horizon + 1):
        if x < bounds[0] or x > bounds[2] or y < bounds[1] or y > bounds[3]:
            status = STATE_VIOLATION
            break
        c, s = math.cos(th), math.sin(th)
        # error in the reference frame
        ex, ey = x - target[0], y - target[1]
        e0 = ct * ex + st * ey
        e1 = -st * ex + ct * ey
        e2 = _wrap(th - theta_ref)
        e3 = v
        a = -(K[0, 0] * e0 + K[0, 1] * e1 + K[0, 2] * e2 + K[0, 3] * e3)
        w = -(K[1, 0] * e0 + K[1, 1] * e1 + K[1, 2] * e2 + K[1, 3] * e3)
        a = min(max(a, lim[2]), lim[3])
        w = min(max(w, lim[4]), lim[5])

        bad_state = False
        bad_input = False
        for i in range(obs.shape[0]):
            dx, dy = x - obs[i, 0], y - obs[i, 1]
            along = dx * c + dy * s
            across = -dx * s + dy * c
            h = dx * dx + dy * dy - obs[i, 2] * obs[i, 2]
            lfh = 2.0 * v * along
            psi1 = lfh + g1 * h
            if h < -tol or psi1 < -tol:
                bad_state = True
                break
            psi2 = 2.0 * v * v + 2.0 * along * a + 2.0 * v * across * w + g2 * psi1 + g1 * lfh
            if psi2 < -tol:
                bad_input = True
                break
        if bad_state:
            status = STATE_VIOLATION
            break
        if bad_input:
            status = INPUT_VIOLATION
            break

        states[n, 0], states[n, 1], states[n, 2], states[n, 3] = x, y, th, v
        controls[n, 0], controls[n, 1] = a, w
        n += 1
        if math.hypot(ex, ey) <= reach_tol:
            status = REACHED
            break
        if k == max_horizon:
            break

        # RK4, input held
        k1x, k1y = v * c, v * s
        v2, th2 = v + 0.5 * dt * a, th + 0.5 * dt * w
        k2x, k2y = v2 * math.cos(th2), v2 * math.sin(th2)
        v4, th4 = v + dt * a, th + dt * w
        k4x, k4y = v4 * math.cos(th4), v4 * math.sin(th4)
        x += dt / 6.0 * (k1x + 4.0 * k2x + k4x)
        y += dt / 6.0 * (k1y + 4.0 * k2y + k4y)
        th = _wrap(th4)
        v = min(max(v4, lim[0]), lim[1])
    last = np.array([x, y, th, v])
    return states[:n].copy(), controls[:n].copy(), n, status, last


@njit(cache=True)
def first_visibility_violation(states, start, half_fov, sensing_range, brake, margin):
    """Index of the first sample >= start with negative visibility margin, else -1."""
    n = states.shape[0]
    for k in range(start, n):
        v = states[k, 3]
        look = v * v / (2.0 * brake) + margin
        if sensing_range - look < 0.0:
            return k
        x0, y0, th = states[k, 0], states[k, 1], states[k, 2]
        px, py = x0, y0
        arc = 0.0
        for j in range(k + 1, n):
            qx, qy = states[j, 0], states[j, 1]
            arc += math.hypot(qx - px, qy - py)
            if arc > look:
                break
            px, py = qx, qy
            dx, dy = qx - x0, qy - y0
            if dx * dx + dy * dy <= 1e-18:
                continue
            if abs(_wrap(math.atan2(dy, dx) - th)) > half_fov:
                return k
    return -1
