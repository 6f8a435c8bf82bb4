"""Command line entry point: ``visrrt plan | simulate | bench``."""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import replace
from pathlib import Path

import numpy as np

from visrrt.config import DATA_DIR, load_config_file, with_planner
from visrrt.planner import plan, plan_from_json
from visrrt.render import render_svg
from visrrt.sim import run_experiment, write_metrics
from visrrt.world import ConfigError, parse_config


def _dump(obj, path):
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    Path(path).write_text(json.dumps(obj, indent=1) + "\n", encoding="utf-8")


def cmd_plan(args) -> int:
    cfg = load_config_file(args.env)
    kw = {"visibility": not args.no_visibility, "discard_truncated": args.discard_truncated}
    if args.max_iter is not None:
        kw["max_iter"] = args.max_iter
    if args.seed is not None:
        kw["seed"] = args.seed
    cfg = with_planner(cfg, **kw)
    res = plan(cfg.world.without_hidden(), cfg.sensor, cfg.planner)
    _dump(res.to_json(), args.out)
    if args.svg:
        Path(args.svg).write_text(render_svg(res, None, cfg.world), encoding="utf-8")
    status = "ok" if res.success else "no path"
    print(f"{status}: cost {res.cost:.3f} after {res.iterations} iterations, {len(res.tree)} nodes -> {args.out}")
    return 0 if res.success else 1


def cmd_simulate(args) -> int:
    cfg = load_config_file(args.env)
    gains = {k: getattr(args, k) for k in ("k_v", "k_omega", "v_cruise", "lookahead") if getattr(args, k) is not None}
    cfg = replace(cfg, gains=replace(cfg.gains, **gains))
    if args.backup_decel is not None:
        cfg = replace(cfg, sim=replace(cfg.sim, backup_decel=args.backup_decel))
    if args.seed is not None:
        cfg = with_planner(cfg, seed=args.seed)
    pr = None
    if args.plan:
        pr = plan_from_json(json.loads(Path(args.plan).read_text(encoding="utf-8")))
    m = run_experiment(cfg, args.controller, args.variant, plan_result=pr)
    write_metrics(m, args.out)
    if args.svg:
        Path(args.svg).write_text(render_svg(m.plans[0], m, cfg.world), encoding="utf-8")
    print(f"{m.outcome}: t={m.sim_time:.2f}s length={m.path_length:.2f}m replans={m.replans} "
          f"backups={m.backup_activations} detections={len(m.detections)} -> {args.out}")
    return 0


def _bench_run(job):
    env, variant, controller, seed, out = job
    cfg = with_planner(load_config_file(env), seed=seed)
    m = run_experiment(cfg, controller, variant)
    stem = f"{Path(env).stem}_{variant}_{controller}_s{seed}"
    write_metrics(m, out / f"{stem}.json")
    (out / f"{stem}.svg").write_text(render_svg(m.plans[0], m, cfg.world), encoding="utf-8")
    return (Path(env).stem, variant, controller, seed, m.to_json())


def load_suite(path) -> list:
    path = Path(path)
    if not path.exists() and (DATA_DIR / path.name).exists():
        path = DATA_DIR / path.name
    suite = parse_config(path.read_text(encoding="utf-8"))
    runs = []
    for entry in suite.get("run", []):
        env = Path(entry["env"])
        if not env.is_absolute():
            env = path.parent / env
        for variant in entry.get("variants", ["no-visibility", "ours"]):
            for controller in entry.get("controllers", ["cbf-qp", "gatekeeper"]):
                for seed in entry.get("seeds", [0]):
                    runs.append((str(env), variant, controller, int(seed)))
    if not runs:
        raise ConfigError(f"{path}: no [[run]] entries")
    return runs


def summarize(rows) -> list[dict]:
    cells = {}
    for env, variant, controller, _, m in rows:
        cells.setdefault((env, variant, controller), []).append(m)
    table = []
    for (env, variant, controller), ms in sorted(cells.items()):
        table.append({
            "env": env,
            "variant": variant,
            "controller": controller,
            "runs": len(ms),
            "success_rate": float(np.mean([m["outcome"] == "reached_goal" for m in ms])),
            "mean_path_length": float(np.mean([m["path_length"] for m in ms])),
            "mean_replans": float(np.mean([m["replans"] for m in ms])),
            "outcomes": sorted({m["outcome"] for m in ms}),
        })
    return table


def format_table(table) -> str:
    head = f"{'env':8s} {'variant':14s} {'controller':11s} {'runs':>4s} {'success':>8s} {'length':>8s} {'replans':>8s}  outcomes"
    lines = [head, "-" * len(head)]
    for r in table:
        lines.append(f"{r['env']:8s} {r['variant']:14s} {r['controller']:11s} {r['runs']:4d} {r['success_rate']:8.2f} "
                     f"{r['mean_path_length']:8.2f} {r['mean_replans']:8.2f}  {','.join(r['outcomes'])}")
    return "\n".join(lines)


def cmd_bench(args) -> int:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    jobs = [(*r, out) for r in load_suite(args.suite)]
    workers = args.jobs or min(len(jobs), os.cpu_count() or 1)
    if workers > 1:
        with ProcessPoolExecutor(workers) as ex:
            rows = list(ex.map(_bench_run, jobs))
    else:
        rows = [_bench_run(j) for j in jobs]
    table = summarize(rows)
    _dump(table, out / "summary.json")
    text = format_table(table)
    (out / "summary.txt").write_text(text + "\n", encoding="utf-8")
    print(text)
    return 0


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="visrrt", description=__doc__)
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("plan", help="plan a reference path on the known obstacles")
    p.add_argument("--env", required=True, help="environment TOML (bundled names such as env1.toml also work)")
    p.add_argument("--max-iter", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--out", default="plan.json")
    p.add_argument("--svg")
    p.add_argument("--no-visibility", action="store_true", help="ablate the visibility constraint")
    p.add_argument("--discard-truncated", action="store_true", help="drop truncated steering segments")
    p.set_defaults(func=cmd_plan)

    s = sub.add_parser("simulate", help="track a plan in closed loop with hidden obstacles")
    s.add_argument("--env", required=True)
    s.add_argument("--controller", choices=["cbf-qp", "gatekeeper"], default="cbf-qp")
    s.add_argument("--variant", choices=["ours", "no-visibility"], default="ours",
                   help="planner used for the initial plan and for replans")
    s.add_argument("--plan", help="plan.json to track; planned from scratch if omitted")
    s.add_argument("--seed", type=int)
    s.add_argument("--backup-decel", type=float)
    s.add_argument("--k-v", type=float)
    s.add_argument("--k-omega", type=float)
    s.add_argument("--v-cruise", type=float)
    s.add_argument("--lookahead", type=float)
    s.add_argument("--out", default="metrics.json")
    s.add_argument("--svg")
    s.set_defaults(func=cmd_simulate)

    b = sub.add_parser("bench", help="run a suite of experiments")
    b.add_argument("--suite", default="figs.toml")
    b.add_argument("--out", default="results")
    b.add_argument("--jobs", type=int)
    b.set_defaults(func=cmd_bench)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (ConfigError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
