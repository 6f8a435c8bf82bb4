import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.optimize import nnls

from oracles import grid_qp, qp_rows, random_qp, slack_feasibility
from visrrt.control import (
    FEAS_TOL,
    QpProblem,
    TrackerGains,
    braking_trajectory,
    cbf_qp_track,
    collision_rows,
    gatekeeper_commit,
    nominal_input,
    solve_qp,
)
from visrrt.dynamics import DEFAULT_LIMITS, make_state, step
from visrrt.lqr import TrajectorySegment

BOX = (np.array([-2.0, -2.0]), np.array([2.0, 2.0]))


def test_unconstrained():
    assert np.array_equal(solve_qp(QpProblem([0.3, -0.4], [], *BOX)), [0.3, -0.4])


def test_single_halfplane_projection():
    u = solve_qp(QpProblem([0.0, 0.0], [(np.array([1.0, 0.0]), -1.0)], *BOX))
    assert np.allclose(u, [1.0, 0.0])


def test_box_clamps_nominal():
    assert np.allclose(solve_qp(QpProblem([5.0, -0.5], [], *BOX)), [2.0, -0.5])


def test_infeasible_is_none():
    rows = [(np.array([1.0, 0.0]), -1.0), (np.array([-1.0, 0.0]), 0.0)]  # u1 >= 1 and u1 <= 0
    assert solve_qp(QpProblem([0, 0], rows, *BOX)) is None
    # a half-plane that excludes the whole box
    assert solve_qp(QpProblem([0, 0], [(np.array([1.0, 1.0]), -5.0)], *BOX)) is None


def test_zero_row():
    assert solve_qp(QpProblem([0, 0], [(np.zeros(2), -1.0)], *BOX)) is None
    assert np.allclose(solve_qp(QpProblem([0.1, 0], [(np.zeros(2), 1.0)], *BOX)), [0.1, 0])


def test_empty_box_rejected():
    with pytest.raises(ValueError):
        QpProblem([0, 0], [], np.array([1.0, 0.0]), np.array([0.0, 1.0]))


def test_vertex_solution():
    rows = [(np.array([1.0, 0.0]), -1.0), (np.array([0.0, 1.0]), -1.0)]
    assert np.allclose(solve_qp(QpProblem([0, 0], rows, *BOX)), [1.0, 1.0])


def test_matches_grid_oracle():
    rng = np.random.default_rng(21)
    checked = 0
    while checked < 40:
        u_nom, C, c0, lo, hi = random_qp(rng)
        slack = slack_feasibility(C, c0, lo, hi)
        if abs(slack) < 1e-6:
            continue
        u = solve_qp(QpProblem(u_nom, list(zip(C, c0)), lo, hi))
        assert (u is not None) == (slack > 0)
        if u is None:
            continue
        assert np.max(np.abs(u - grid_qp(u_nom, C, c0, lo, hi))) < 1e-4
        checked += 1


def test_kkt_conditions():
    rng = np.random.default_rng(8)
    done = 0
    while done < 200:
        u_nom, C, c0, lo, hi = random_qp(rng)
        u = solve_qp(QpProblem(u_nom, list(zip(C, c0)), lo, hi))
        if u is None:
            continue
        A, b = qp_rows(C, c0, lo, hi)
        slack = A @ u + b
        assert np.all(slack >= -FEAS_TOL * np.maximum(1, np.abs(A).sum(axis=1)))
        active = A[np.abs(slack) < 1e-7]
        if len(active) == 0:
            assert np.allclose(u, u_nom)
        else:
            # u - u_nom = sum lambda_i a_i with lambda >= 0
            lam, resid = nnls(active.T, u - u_nom)
            assert resid < 1e-6
        done += 1


def test_nominal_input_law():
    g = TrackerGains(k_v=1.0, k_omega=2.0, v_cruise=1.0)
    u = nominal_input(make_state(0, 0, 0, 0.5), np.array([1.0, 0.0]), g)
    assert np.allclose(u, [0.5, 0.0])
    u = nominal_input(make_state(0, 0, 0, 0.0), np.array([0.0, 1.0]), g)
    assert u[0] == pytest.approx(0.0, abs=1e-12) and u[1] == pytest.approx(math.pi)
    # reference speed of a 4-vector waypoint caps the set-point
    u = nominal_input(make_state(0, 0, 0, 0.0), np.array([1.0, 0.0, 0.0, 0.4]), g)
    assert u[0] == pytest.approx(0.4)
    u = nominal_input(make_state(0, 0, 0, 0.0), np.array([1.0, 0.0, 0.0, 0.0]), g)
    assert u[0] == pytest.approx(g.v_min)
    # and so does the distance to the goal
    u = nominal_input(make_state(0, 0, 0, 0.0), np.array([1.0, 0.0]), g, goal_dist=0.1)
    assert u[0] == pytest.approx(0.1)


def test_track_without_obstacles_is_clamped_nominal():
    s = make_state(0, 0, 0, 0.0)
    wp = np.array([0.0, -1.0])
    u = cbf_qp_track(s, wp, np.zeros((0, 3)))
    assert np.allclose(u, np.clip(nominal_input(s, wp), DEFAULT_LIMITS.u_low, DEFAULT_LIMITS.u_high))


def test_far_obstacle_inactive():
    s = make_state(0, 0, 0, 0.5)
    wp = np.array([1.0, 0.0])
    obs = np.array([[20.0, 5.0, 1.0]])
    (c, c0), = collision_rows(s, obs)
    u_nom = nominal_input(s, wp)
    assert c @ u_nom + c0 > 0
    assert np.allclose(cbf_qp_track(s, wp, obs), u_nom)


def _polygon_empty(c, c0, n=801):
    a = np.linspace(-1, 1, n)
    A, W = np.meshgrid(a, a, indexing="ij")
    return not np.any(c[0] * A + c[1] * W + c0 >= 0)


def test_infeasible_head_on_at_boundary():
    # robot on the inflated boundary heading at the centre; rho = 2
    rho = 2.0
    speeds = np.linspace(0, 1, 201)
    # brute force: smallest speed whose admissible set in the box is empty
    empty = []
    for v in speeds:
        (c, c0), = collision_rows(make_state(rho, 0, math.pi, v), np.array([[0.0, 0.0, rho]]))
        empty.append(_polygon_empty(c, c0))
    v_min = speeds[int(np.argmax(empty))]
    assert any(empty) and all(empty[int(np.argmax(empty)):])
    for v in speeds:
        u = cbf_qp_track(make_state(rho, 0, math.pi, v), np.array([-5.0, 0.0]), np.array([[0.0, 0.0, rho]]))
        assert (u is None) == (v >= v_min)


def _disk_set(cx, cy, r):
    class Disk:
        def contains(self, pts):
            pts = np.atleast_2d(pts)
            return np.hypot(pts[:, 0] - cx, pts[:, 1] - cy) <= r

    return Disk()


def _straight_nominal(v=0.8, n=40):
    states = [make_state(0, 0, 0, v)]
    for _ in range(n):
        states.append(step(states[-1], [0.0, 0.0]))
    return TrajectorySegment(np.array(states), np.zeros((n + 1, 2)))


def test_braking_trajectory():
    st_, ctl = braking_trajectory(make_state(0, 0, 0, 1.0), 1.0)
    assert st_[-1, 3] == 0.0
    assert st_[-1, 0] == pytest.approx(0.5, abs=0.03)
    assert np.allclose(st_[:, 1], 0.0)
    assert len(ctl) == len(st_)


def test_gatekeeper_full_nominal():
    nom = _straight_nominal()
    d = gatekeeper_commit(nom, _disk_set(0, 0, 10.0), 1.0)
    assert not d.used_backup and not d.replan_requested
    assert d.committed is nom


def test_gatekeeper_truncates_with_backup():
    nom = _straight_nominal()
    bt = _disk_set(0, 0, 1.6)
    d = gatekeeper_commit(nom, bt, 1.0)
    assert d.used_backup and not d.replan_requested
    pts = d.committed.states
    assert bt.contains(pts[:, :2]).all()
    assert pts[-1, 3] == 0.0
    k = d.prefix_len - 1
    assert np.array_equal(pts[:k], nom.states[:k])
    # the next longer prefix would not fit its stop into the set
    longer, _ = braking_trajectory(nom.states[k + 1], 1.0)
    assert not bt.contains(longer[:, :2]).all()


def test_gatekeeper_requests_replan():
    nom = _straight_nominal()
    d = gatekeeper_commit(nom, _disk_set(0, 0, 0.05), 1.0)
    assert d.used_backup and d.replan_requested and d.braking_now
    assert d.committed.states[-1, 3] == 0.0


def test_gatekeeper_respects_obstacles():
    nom = _straight_nominal()
    obs = np.array([[2.0, 0.0, 0.5]])
    d = gatekeeper_commit(nom, _disk_set(0, 0, 10.0), 1.0, obs)
    assert d.used_backup
    assert np.all(np.hypot(d.committed.states[:, 0] - 2.0, d.committed.states[:, 1]) >= 0.5)


@settings(max_examples=60, deadline=None)
@given(st.floats(0.05, 4.0), st.floats(0.0, 2.0), st.floats(0.1, 1.0))
def test_gatekeeper_monotone_commitment(r, extra, v):
    nom = _straight_nominal(v)
    small = gatekeeper_commit(nom, _disk_set(0, 0, r), 1.0)
    big = gatekeeper_commit(nom, _disk_set(0, 0, r + extra), 1.0)
    assert big.prefix_len >= small.prefix_len
    for d, rad in ((small, r), (big, r + extra)):
        if d.prefix_len == 0:
            # no stop fits at all: the backup still brakes, and asks for a replan
            assert d.replan_requested and d.committed.states[-1, 3] == 0.0
            continue
        inside = np.hypot(d.committed.states[:, 0], d.committed.states[:, 1]) <= rad
        assert inside.all()
