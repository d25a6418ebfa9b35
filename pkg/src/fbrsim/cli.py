"""Command-line entry point: run / batch / genmap / report."""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from .harness import ExperimentSpec, make_config, resolve_map, run_batch
from .mapgen import generate_map
from .report import render_report
from .simulator import Simulation


def _fmt_opt(v, suffix=""):
    return "" if v is None else f"{v:.1f}{suffix}"


def cmd_run(args) -> int:
    grid = resolve_map(args.map)
    overrides = {}
    for key in ("alpha", "comm_range", "tick", "time_limit"):
        val = getattr(args, key)
        if val is not None:
            overrides[key] = val
    if args.decay_seconds is not None:
        overrides["decay_seconds"] = args.decay_seconds
    config = make_config(args.robots, args.strategy, args.seed, overrides)
    result = Simulation(grid, config).run()
    print(f"map={args.map} m={args.robots} strategy={args.strategy} seed={args.seed}")
    print(f"success={str(result.success).lower()} terminated_by={result.terminated_by}")
    if result.t_rendezvous is not None:
        print(f"t={result.t_rendezvous:.1f}s (fallback excluded: {result.fallback_time_excluded:.1f}s)")
    partials = " ".join(
        f"t{i + 1}={_fmt_opt(t, 's')}" for i, t in enumerate(result.t_partial)
    )
    print(f"partial rendezvous: {partials}")
    print(
        f"area union={result.area_union_m2:.1f}m2 intersection={result.area_intersection_m2:.1f}m2 "
        f"distance={result.total_distance_m:.1f}m sim_time={result.sim_time_s:.1f}s"
    )
    return 0 if result.success else 1


def cmd_batch(args) -> int:
    spec = ExperimentSpec.from_file(args.spec)
    out = Path(args.out)
    records, rows = run_batch(spec, out_dir=out, workers=args.workers)
    figures = render_report(out)
    print(f"{len(records)} runs -> {out / 'runs.csv'}")
    for row in rows:
        mean = f"{row.mean_t:.1f}" if row.mean_t is not None else "-"
        delta = f" delta_t={row.delta_t:.2f}" if row.delta_t is not None else ""
        print(
            f"{row.map_name} m={row.m} {row.strategy}: R={row.R:.2f} "
            f"mean_t={mean}s over {row.runs} runs{delta}"
        )
    print(f"{len(figures)} figures rendered")
    return 0


def cmd_genmap(args) -> int:
    grid = generate_map(args.style, args.size, args.rooms, args.seed)
    Path(args.out).write_text(grid.to_text())
    print(f"{args.style} map {grid.width}x{grid.height} cells -> {args.out}")
    return 0


def cmd_report(args) -> int:
    figures = render_report(args.out)
    for path in figures:
        print(path)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="fbrsim", description="Multi-robot rendezvous exploration simulator")
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="execute a single simulation run")
    p_run.add_argument("--map", required=True, help="map file path or gen:... token")
    p_run.add_argument("--robots", type=int, required=True)
    p_run.add_argument("--strategy", choices=("fbe", "fbr"), required=True)
    p_run.add_argument("--seed", type=int, required=True)
    p_run.add_argument("--alpha", type=float, default=None)
    p_run.add_argument("--comm-range", dest="comm_range", type=float, default=None)
    p_run.add_argument("--decay-seconds", dest="decay_seconds", type=float, default=None)
    p_run.add_argument("--tick", type=float, default=None)
    p_run.add_argument("--time-limit", dest="time_limit", type=float, default=None)
    p_run.set_defaults(func=cmd_run)

    p_batch = sub.add_parser("batch", help="run an experiment spec and write CSVs + figures")
    p_batch.add_argument("--spec", required=True)
    p_batch.add_argument("--out", required=True)
    p_batch.add_argument("--workers", type=int, default=1)
    p_batch.set_defaults(func=cmd_batch)

    p_gen = sub.add_parser("genmap", help="generate a procedural map file")
    p_gen.add_argument("--style", choices=("ring", "office", "campus"), required=True)
    p_gen.add_argument("--size", type=float, required=True, help="target area in square meters")
    p_gen.add_argument("--rooms", type=int, required=True)
    p_gen.add_argument("--seed", type=int, required=True)
    p_gen.add_argument("--out", required=True)
    p_gen.set_defaults(func=cmd_genmap)

    p_rep = sub.add_parser("report", help="re-render figures from an existing batch directory")
    p_rep.add_argument("--out", required=True)
    p_rep.set_defaults(func=cmd_report)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
