"""env2: the gatekeeper in a chicane.

The shortest way weaves through a chicane. Its sharp turns swing the narrow
cone away from the path, so the visibility-aware planner goes around the
top instead. A hidden post closes the chicane exit: the gatekeeper on the
ablated plan brakes to a stop and asks for new plans, none of which can
leave a standstill facing the post.
"""
from pathlib import Path

from visrrt.config import fixture
from visrrt.render import render_svg
from visrrt.sim import run_experiment

out = Path(__file__).parent / "out"
out.mkdir(exist_ok=True)
cfg = fixture("env2")

for variant in ("no-visibility", "ours"):
    m = run_experiment(cfg, "gatekeeper", variant)
    p = m.plans[0]
    print(f"{variant:14s} plan cost {p.cost:5.2f}  ->  {m.outcome}, {m.backup_activations} backups, "
          f"{m.replans} replans, path {m.path_length:.1f} m in {m.sim_time:.1f}s")
    (out / f"env2_{variant}.svg").write_text(render_svg(p, m, cfg.world))
print("svg written to", out)
