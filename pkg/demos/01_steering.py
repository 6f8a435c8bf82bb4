"""LQR steering with and without the visibility check.

The same start and target are steered twice: once certifying only the
collision barrier, once also requiring that the braking stretch of the
path stays inside the sensor cone. With a short sensing range the second
rollout is cut where the robot becomes too fast to stop inside what it
can see.
"""
import numpy as np

from visrrt.dynamics import make_state
from visrrt.lqr import SteerParams, Steerer
from visrrt.safety import SensorSpec, visibility_constraint
from visrrt.world import Obstacle, WorldModel

world = WorldModel(bounds=(-1, -2, 7, 2), start=make_state(0.5, 0.0), goal=np.array([5.5, 0.0]),
                   known_obstacles=(Obstacle((3.0, -1.3), 0.3),), goal_tolerance=0.1)
sensor = SensorSpec.from_degrees(45, 0.9)
start, target = make_state(0.5, 0.0, 0.0, 0.0), np.array([5.5, 0.0])

for vis in (False, True):
    steer = Steerer(world, sensor, SteerParams(visibility=vis, margin=0.7, gammas=(2.0, 2.0)))
    seg = steer.steer(start, target)
    h = [visibility_constraint(k, seg.states, sensor, 1.0, 0.7) for k in range(len(seg))]
    print(f"visibility={vis!s:5}  samples={len(seg):3d}  reached={seg.reached!s:5}  "
          f"cut by={seg.violation}  top speed={seg.states[:, 3].max():.2f}  min h_vis={min(h):+.3f}")

# the range term alone caps the speed: R - v^2/2 - margin >= 0
print("speed cap from the range term: %.2f m/s" % np.sqrt(2 * (0.9 - 0.7)))
