"""When does the cone term of the visibility margin bind?

On a circle of curvature k, a point at arc s ahead has bearing k*s/2 from
the current heading. The lookahead is v^2/2 + margin, and the turn rate
bound gives k <= w_max / v. The cone term stays positive while

    (w_max / v) * (v^2/2 + margin) / 2 <= fov/2.

This prints, per margin, the speeds at which a full-rate turn is still
allowed. With the default 45 degree cone and |w| <= 1, a small margin
leaves almost every speed free; the range term then does the work.
"""
import numpy as np

half_fov = np.radians(45) / 2
v = np.linspace(0.01, 1.0, 100)
for w_max in (1.0, 2.0):
    for margin in (0.1, 0.3, 0.5, 0.7):
        ok = (w_max / v) * (v * v / 2 + margin) / 2 <= half_fov
        free = v[ok]
        span = f"{free.min():.2f}..{free.max():.2f} m/s" if len(free) else "none"
        print(f"w_max {w_max:.0f}  margin {margin:.1f}: full-rate turns allowed at {ok.mean():4.0%} of speeds ({span})")
