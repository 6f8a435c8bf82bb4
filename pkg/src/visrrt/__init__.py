"""Visibility-aware sampling-based planning with control barrier functions.

The package builds reference paths for a unicycle robot whose sensor only
covers a narrow cone in front of it, and provides two safety filters
(a CBF quadratic program and a gatekeeper commitment filter) plus a small
closed-loop simulator to compare paths that do and do not account for
the sensor's limits.
"""

from visrrt.world import Obstacle, WorldModel, load_world, load_world_file, clearance, in_true_free_set
from visrrt.dynamics import Limits, make_state, step, affine_fields, linearize
from visrrt.safety import SensorSpec, Footprint
from visrrt.planner import PlannerParams, plan
from visrrt.sim import run_experiment

__all__ = [
    "Obstacle",
    "WorldModel",
    "load_world",
    "load_world_file",
    "clearance",
    "in_true_free_set",
    "Limits",
    "make_state",
    "step",
    "affine_fields",
    "linearize",
    "SensorSpec",
    "Footprint",
    "PlannerParams",
    "plan",
    "run_experiment",
]

__version__ = "0.1.0"
