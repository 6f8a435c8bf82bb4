"""Deterministic SVG snapshots of a plan and, optionally, its closed-loop run.

Colours: known obstacles black, hidden obstacles orange, tree edges green,
reference path red, sensed footprints translucent gray, detections red
dots, start a blue square and goal a yellow square. Every element carries
a ``class`` attribute so tests can count them.
"""

from __future__ import annotations

import math

import numpy as np

from visrrt.planner import PlanResult
from visrrt.world import WorldModel


def _f(x: float) -> str:
    s = f"{x:.3f}"
    return "0.000" if s == "-0.000" else s


def _pts(xy) -> str:
    return " ".join(f"{_f(x)},{_f(y)}" for x, y in xy)


def _sector(fp, n: int = 8) -> str:
    x, y = fp.position
    r, half = fp.spec.range, fp.spec.half_fov
    angs = fp.heading + np.linspace(-half, half, n)
    rim = [(x + r * math.cos(a), y + r * math.sin(a)) for a in angs]
    return _pts([(x, y)] + rim)


def render_svg(plan: PlanResult | None, metrics=None, world: WorldModel | None = None,
               scale: float = 60.0, footprint_stride: int = 4, edge_stride: int = 4) -> str:
    """SVG text; identical inputs give byte-identical output."""
    if world is None:
        raise ValueError("render_svg needs the world for bounds and obstacles")
    xmin, ymin, xmax, ymax = world.bounds
    w, h = (xmax - xmin) * scale, (ymax - ymin) * scale
    sw = 1.0 / scale  # one screen pixel in world units
    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{_f(w)}" height="{_f(h)}" '
        f'viewBox="0 0 {_f(w)} {_f(h)}">',
        f'<g transform="scale({_f(scale)},{_f(-scale)}) translate({_f(-xmin)},{_f(-ymax)})">',
        f'<rect class="bounds" x="{_f(xmin)}" y="{_f(ymin)}" width="{_f(xmax - xmin)}" '
        f'height="{_f(ymax - ymin)}" fill="white" stroke="black" stroke-width="{_f(2 * sw)}"/>',
    ]

    if metrics is not None and metrics.free_set is not None:
        fps = metrics.free_set.footprints
        for fp in fps[::footprint_stride]:
            out.append(f'<polygon class="footprint" points="{_sector(fp)}" fill="gray" fill-opacity="0.08" stroke="none"/>')

    for o in world.known_obstacles:
        out.append(f'<circle class="obstacle" cx="{_f(o.center[0])}" cy="{_f(o.center[1])}" r="{_f(o.radius)}" fill="black"/>')
    for o in world.hidden_obstacles:
        out.append(f'<circle class="hidden" cx="{_f(o.center[0])}" cy="{_f(o.center[1])}" r="{_f(o.radius)}" fill="orange"/>')

    if plan is not None:
        for _, child in plan.tree.edges():
            st = plan.tree.nodes[child].segment.states
            xy = np.vstack([st[::edge_stride, :2], st[-1:, :2]])
            out.append(f'<polyline class="edge" points="{_pts(xy)}" fill="none" stroke="green" stroke-width="{_f(sw)}"/>')
        if plan.success:
            out.append(f'<polyline class="path" points="{_pts(plan.path[:, :2])}" fill="none" stroke="red" '
                       f'stroke-width="{_f(2.5 * sw)}"/>')

    if metrics is not None:
        if metrics.trajectory is not None and len(metrics.trajectory) > 1:
            out.append(f'<polyline class="executed" points="{_pts(metrics.trajectory[:, :2])}" fill="none" '
                       f'stroke="blue" stroke-width="{_f(1.5 * sw)}" stroke-dasharray="{_f(4 * sw)}"/>')
        for _, _, x, y in metrics.detections:
            out.append(f'<circle class="detection" cx="{_f(x)}" cy="{_f(y)}" r="{_f(4 * sw)}" fill="red"/>')

    m = 6 * sw
    sx, sy = world.start[:2]
    gx, gy = world.goal
    out.append(f'<rect class="start" x="{_f(sx - m)}" y="{_f(sy - m)}" width="{_f(2 * m)}" height="{_f(2 * m)}" fill="blue"/>')
    out.append(f'<rect class="goal" x="{_f(gx - m)}" y="{_f(gy - m)}" width="{_f(2 * m)}" height="{_f(2 * m)}" fill="yellow" '
               f'stroke="black" stroke-width="{_f(sw)}"/>')
    out += ["</g>", "</svg>", ""]
    return "\n".join(out)
