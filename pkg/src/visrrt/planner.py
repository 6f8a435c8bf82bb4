"""Visibility-aware RRT*: a sampling planner over certified LQR steering segments."""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field, replace

import numpy as np

from visrrt.lqr import SteerParams, Steerer, TrajectorySegment
from visrrt.safety import SensorSpec
from visrrt.world import WorldModel

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class PlannerParams:
    max_iter: int = 2000
    step_len: float = 1.0
    neighbor_radius: float = 2.0
    goal_bias: float = 0.05
    seed: int = 0
    visibility: bool = True
    discard_truncated: bool = False
    # bounded work per iteration: at most this many neighbours are steered to
    max_neighbors: int = 10
    # rewiring re-steers the whole subtree of the rewired node; bigger subtrees are skipped
    rewire_subtree_cap: int = 8
    steer: SteerParams = field(default_factory=SteerParams)


@dataclass
class Node:
    state: np.ndarray
    parent: int | None
    cost: float
    segment: TrajectorySegment
    anchor: np.ndarray  # position every steer into this node aims at
    children: list = field(default_factory=list)


class Tree:
    def __init__(self, root_state):
        root_state = np.asarray(root_state, dtype=float)
        seg = TrajectorySegment(root_state[None, :].copy(), np.zeros((1, 2)), reached=True)
        self.nodes: list[Node] = [Node(root_state.copy(), None, 0.0, seg, root_state[:2].copy())]
        self._pos = np.zeros((64, 2))
        self._pos[0] = root_state[:2]

    def __len__(self):
        return len(self.nodes)

    def add(self, parent: int, seg: TrajectorySegment, anchor) -> int:
        idx = len(self.nodes)
        cost = self.nodes[parent].cost + seg.arc_length
        self.nodes.append(Node(seg.end.copy(), parent, cost, seg, np.asarray(anchor, dtype=float).copy()))
        self.nodes[parent].children.append(idx)
        if idx >= len(self._pos):
            self._pos = np.vstack([self._pos, np.zeros_like(self._pos)])
        self._pos[idx] = seg.end[:2]
        return idx

    @property
    def positions(self) -> np.ndarray:
        return self._pos[: len(self.nodes)]

    def nearest(self, p) -> int:
        d = self.positions - np.asarray(p)[:2]
        return int(np.argmin(d[:, 0] ** 2 + d[:, 1] ** 2))

    def near(self, p, radius: float) -> np.ndarray:
        d = self.positions - np.asarray(p)[:2]
        d2 = d[:, 0] ** 2 + d[:, 1] ** 2
        idx = np.flatnonzero(d2 <= radius * radius)
        return idx[np.lexsort((idx, d2[idx]))]

    def subtree(self, i: int) -> list[int]:
        out, stack = [], list(self.nodes[i].children)
        while stack:
            j = stack.pop()
            out.append(j)
            stack.extend(self.nodes[j].children)
        return out

    def set_parent(self, i: int, parent: int, seg: TrajectorySegment):
        node = self.nodes[i]
        if node.parent is not None:
            self.nodes[node.parent].children.remove(i)
        node.parent = parent
        self.nodes[parent].children.append(i)
        node.segment = seg
        node.state = seg.end.copy()
        node.cost = self.nodes[parent].cost + seg.arc_length
        self._pos[i] = node.state[:2]

    def edges(self) -> list[tuple[int, int]]:
        return [(n.parent, i) for i, n in enumerate(self.nodes) if n.parent is not None]

    def path_to(self, i: int) -> list[int]:
        chain = []
        while i is not None:
            chain.append(i)
            i = self.nodes[i].parent
        return chain[::-1]


@dataclass
class PlanResult:
    waypoints: np.ndarray
    path: np.ndarray  # rows (x, y, theta, v)
    times: np.ndarray
    cost: float
    iterations: int
    success: bool
    tree: Tree
    node_ids: list = field(default_factory=list)
    first_success_iter: int | None = None
    segments: list = field(default_factory=list)

    def to_json(self) -> dict:
        path = np.column_stack([self.path, self.times]) if len(self.path) else np.zeros((0, 5))
        return {
            "waypoints": np.round(self.waypoints, 12).tolist(),
            "path": np.round(path, 12).tolist(),
            "cost": round(float(self.cost), 12) if math.isfinite(self.cost) else None,
            "iterations": int(self.iterations),
            "success": bool(self.success),
            "tree_edges": [list(e) for e in self.tree.edges()],
        }


def extract_path(tree: Tree, goal, goal_tolerance: float, iterations: int = 0) -> PlanResult:
    """Cheapest node within ``goal_tolerance`` of ``goal`` and its ancestry."""
    d = np.hypot(*(tree.positions - np.asarray(goal)[:2]).T)
    hits = np.flatnonzero(d <= goal_tolerance)
    if len(hits) == 0:
        return PlanResult(np.zeros((0, 4)), np.zeros((0, 4)), np.zeros(0), math.inf, iterations, False, tree)
    costs = np.array([tree.nodes[i].cost for i in hits])
    best = int(hits[np.lexsort((hits, costs))[0]])
    chain = tree.path_to(best)
    segs = [tree.nodes[i].segment for i in chain[1:]]
    parts = [tree.nodes[chain[0]].state[None, :]] + [s.states[1:] for s in segs]
    path = np.vstack(parts)
    times = tree.nodes[chain[0]].segment.dt * np.arange(len(path))
    waypoints = np.array([tree.nodes[i].state for i in chain])
    return PlanResult(waypoints, path, times, tree.nodes[best].cost, iterations, True, tree,
                      node_ids=chain, segments=segs)


class VisibilityRRTStar:
    def __init__(self, world: WorldModel, sensor: SensorSpec, params: PlannerParams = PlannerParams()):
        # hidden obstacles are never visible to the planner
        self.world = world.without_hidden()
        self.sensor = sensor
        self.params = params
        self.steerer = Steerer(self.world, sensor, replace(params.steer, visibility=params.visibility))
        lim = params.steer.limits
        self._tail_arc = lim.v_max ** 2 / (2 * lim.brake) + params.steer.margin
        self.tree = Tree(self.world.start)
        self.rng = np.random.default_rng(params.seed)

    def _steer(self, i: int, target):
        return self.steerer.steer(self.tree.nodes[i].state, target)

    def _junction_ok(self, parent_seg: TrajectorySegment, seg: TrajectorySegment) -> bool:
        """Visibility of the parent's last samples once ``seg`` follows them."""
        if not self.params.visibility or len(parent_seg) < 2:
            return True
        prev = parent_seg.states
        arcs = np.hypot(*np.diff(prev[:, :2], axis=0).T)
        back = np.cumsum(arcs[::-1])  # arc from sample len-2-j to the end
        n_tail = int(np.searchsorted(back, self._tail_arc, side="right")) + 1
        start = max(0, len(prev) - 1 - n_tail)
        joined = np.vstack([prev[start:-1], seg.states])
        k = self.steerer.first_visibility_violation(joined, 0)
        return k < 0 or k >= len(prev) - 1 - start

    def _fit_junction(self, parent: int, seg: TrajectorySegment) -> TrajectorySegment:
        parent_seg = self.tree.nodes[parent].segment
        if self._junction_ok(parent_seg, seg):
            return seg
        lo, hi = 1, len(seg)  # prefix of length lo passes, hi fails
        while hi - lo > 1:
            mid = (lo + hi) // 2
            if self._junction_ok(parent_seg, seg.prefix(mid, None)):
                lo = mid
            else:
                hi = mid
        return seg.prefix(lo, "visibility")

    def sample(self):
        if self.rng.random() < self.params.goal_bias:
            return self.world.goal.copy()
        xmin, ymin, xmax, ymax = self.world.bounds
        return np.array([self.rng.uniform(xmin, xmax), self.rng.uniform(ymin, ymax)])

    def iterate(self):
        tree, p = self.tree, self.params
        q = self.sample()
        i_near = tree.nearest(q)
        near_pos = tree.positions[i_near]
        d = float(np.hypot(*(q - near_pos)))
        if d > p.step_len:
            q = near_pos + (q - near_pos) * (p.step_len / d)
        seg = self._steer(i_near, q)
        if len(seg) >= 2:
            seg = self._fit_junction(i_near, seg)
        if len(seg) < 2 or (p.discard_truncated and seg.truncated):
            return None
        # a truncated prefix is a complete segment into its own endpoint
        seg = replace(seg, truncated=False, violation=None)
        anchor = seg.end[:2].copy()

        best_parent, best_seg = i_near, seg
        best_cost = tree.nodes[i_near].cost + seg.arc_length
        neighbors = [int(j) for j in tree.near(anchor, p.neighbor_radius) if j != i_near][: p.max_neighbors]
        for j in neighbors:
            cand = self._steer(j, anchor)
            if not cand.reached:
                continue
            cost = tree.nodes[j].cost + cand.arc_length
            if cost < best_cost - 1e-12 and self._junction_ok(tree.nodes[j].segment, cand):
                best_parent, best_seg, best_cost = j, cand, cost
        new = tree.add(best_parent, best_seg, anchor)

        for j in neighbors:
            if j == best_parent or tree.nodes[j].parent is None:
                continue
            self._try_rewire(new, j)
        return new

    def _try_rewire(self, new: int, j: int) -> bool:
        tree = self.tree
        node = tree.nodes[j]
        sub = tree.subtree(j)
        if len(sub) > self.params.rewire_subtree_cap or new in sub:
            return False
        seg = self.steerer.steer(tree.nodes[new].state, node.anchor)
        if not seg.reached:
            return False
        cost = tree.nodes[new].cost + seg.arc_length
        if cost >= node.cost - 1e-9 or not self._junction_ok(tree.nodes[new].segment, seg):
            return False
        if self._leaves_goal(j, seg):
            return False
        plan = {j: (new, seg, cost)}
        order = [j] + sub
        for c in order[1:]:
            par = tree.nodes[c].parent
            par_seg, par_cost = plan[par][1], plan[par][2]
            s = self.steerer.steer(par_seg.end, tree.nodes[c].anchor)
            if not s.reached or not self._junction_ok(par_seg, s) or self._leaves_goal(c, s):
                return False
            c_cost = par_cost + s.arc_length
            if c_cost > tree.nodes[c].cost + 1e-9:
                return False
            plan[c] = (par, s, c_cost)
        for c in order:
            par, s, _ = plan[c]
            tree.set_parent(c, par, s)
        return True

    def _leaves_goal(self, i: int, seg: TrajectorySegment) -> bool:
        # re-steered endpoints can drift within the reach tolerance; never let that undo a goal hit
        g, tol = self.world.goal, self.world.goal_tolerance
        was = np.hypot(*(self.tree.nodes[i].state[:2] - g)) <= tol
        return bool(was and np.hypot(*(seg.end[:2] - g)) > tol)

    def goal_reached(self) -> bool:
        d = np.hypot(*(self.tree.positions - self.world.goal).T)
        return bool(np.any(d <= self.world.goal_tolerance))

    def run(self) -> PlanResult:
        first = None
        for it in range(1, self.params.max_iter + 1):
            self.iterate()
            if first is None and self.goal_reached():
                first = it
                log.debug("goal first reached at iteration %d", it)
        res = extract_path(self.tree, self.world.goal, self.world.goal_tolerance, self.params.max_iter)
        res.first_success_iter = first
        return res


def plan(world: WorldModel, sensor: SensorSpec, params: PlannerParams = PlannerParams()) -> PlanResult:
    """Plan from ``world.start`` to ``world.goal`` using known obstacles only.

    A failed search is reported through ``success=False``, not an exception.
    """
    return VisibilityRRTStar(world, sensor, params).run()


def plan_from_json(d: dict) -> PlanResult:
    """Rebuild a :class:`PlanResult` from ``plan.json``; the tree keeps only its root."""
    path = np.asarray(d["path"], dtype=float).reshape(-1, 5)
    waypoints = np.asarray(d["waypoints"], dtype=float).reshape(-1, 4)
    root = waypoints[0] if len(waypoints) else np.zeros(4)
    return PlanResult(waypoints, path[:, :4], path[:, 4], math.inf if d["cost"] is None else float(d["cost"]), int(d["iterations"]),
                      bool(d["success"]), Tree(root))
