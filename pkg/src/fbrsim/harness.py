"""Batch experiment driver: spec files, seeded cells, CSV output, summaries."""

from __future__ import annotations

import csv
import math
import zlib
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .gridworld import OccupancyGrid, load_map
from .mapgen import generate_map
from .simulator import TERM_FAULT, RunResult, SimConfig, Simulation

# SimConfig fields adjustable from a spec file or the CLI.
CONFIG_KEYS = {
    "alpha": float,
    "comm_range": float,
    "decay_seconds": float,  # maps to SimConfig.decay_T
    "tick": float,
    "time_limit": float,
    "speed": float,
    "lidar_range": float,
    "n_beams": int,
    "pose_interval": float,
    "chunk_size": int,
    "min_frontier_cells": int,
}


@dataclass
class ExperimentSpec:
    maps: list[str]  # file paths or gen: tokens
    team_sizes: list[int]
    strategies: list[str]
    runs_per_cell: int = 10
    base_seed: int = 0
    overrides: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.runs_per_cell < 1:
            raise ValueError("runs_per_cell must be >= 1")
        if not self.maps or not self.team_sizes or not self.strategies:
            raise ValueError("spec needs at least one map, one m, and one strategy")

    @classmethod
    def from_text(cls, text: str) -> "ExperimentSpec":
        maps, sizes, strategies = [], [], []
        runs, base_seed = 10, 0
        overrides = {}
        for lineno, raw in enumerate(text.splitlines(), start=1):
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            if "=" not in line:
                raise ValueError(f"spec line {lineno}: expected key=value")
            key, val = line.split("=", 1)
            key, val = key.strip(), val.strip()
            if key == "map":
                maps.append(val)
            elif key == "m":
                sizes.append(int(val))
            elif key == "strategy":
                if val not in ("fbe", "fbr"):
                    raise ValueError(f"spec line {lineno}: unknown strategy {val!r}")
                strategies.append(val)
            elif key == "runs_per_cell":
                runs = int(val)
            elif key == "base_seed":
                base_seed = int(val)
            elif key in CONFIG_KEYS:
                overrides[key] = CONFIG_KEYS[key](val)
            else:
                raise ValueError(f"spec line {lineno}: unknown key {key!r}")
        return cls(maps, sizes, strategies, runs, base_seed, overrides)

    @classmethod
    def from_file(cls, path) -> "ExperimentSpec":
        return cls.from_text(Path(path).read_text())


@dataclass
class RunRecord:
    map_name: str
    m: int
    strategy: str
    seed: int
    result: RunResult


@dataclass
class SummaryRow:
    map_name: str
    m: int
    strategy: str
    runs: int
    R: float
    mean_t: float | None
    sigma_t: float | None
    mean_area: float | None
    delta_t: float | None  # FBR rows only, against the matching FBE cell
    faults: int


def cell_seed(base_seed: int, map_name: str, m: int, strategy: str, run_index: int) -> int:
    """Deterministic per-run seed: base + crc32 of the cell key + run index."""
    key = f"{map_name}|{m}|{strategy}"
    return (base_seed + zlib.crc32(key.encode("utf-8")) + run_index) % (2**63)


def map_name_of(token: str) -> str:
    if token.startswith("gen:"):
        parts = dict(kv.split("=", 1) for kv in token[4:].split(","))
        return "gen-{style}-{size}-{rooms}-{seed}".format(
            style=parts.get("style", "ring"),
            size=parts.get("size_m2", "1600"),
            rooms=parts.get("rooms", "12"),
            seed=parts.get("seed", "0"),
        )
    return Path(token).stem


def resolve_map(token: str) -> OccupancyGrid:
    """Load a map file, or build one from a `gen:style=...,size_m2=...,rooms=...,seed=...` token."""
    if token.startswith("gen:"):
        parts = dict(kv.split("=", 1) for kv in token[4:].split(","))
        return generate_map(
            parts.get("style", "ring"),
            float(parts.get("size_m2", "1600")),
            int(parts.get("rooms", "12")),
            int(parts.get("seed", "0")),
            float(parts.get("resolution", "0.1")),
        )
    return load_map(Path(token).read_text())


def make_config(m: int, strategy: str, seed: int, overrides: dict) -> SimConfig:
    kwargs = {"m": m, "strategy": strategy, "seed": seed}
    for key, val in overrides.items():
        if key == "decay_seconds":
            kwargs["decay_T"] = val
        else:
            kwargs[key] = val
    return SimConfig(**kwargs)


def _run_one(args) -> RunRecord:
    map_token, m, strategy, seed, overrides = args
    grid = resolve_map(map_token)
    config = make_config(m, strategy, seed, overrides)
    result = Simulation(grid, config).run()
    return RunRecord(map_name_of(map_token), m, strategy, seed, result)


def run_batch(spec: ExperimentSpec, out_dir=None, workers: int = 1):
    """Execute every (map, m, strategy, run) cell.

    Returns (records, summary_rows); when out_dir is given, also writes
    runs.csv, summary.csv, and progression.csv there.
    """
    tasks = []
    for map_token in spec.maps:
        name = map_name_of(map_token)
        for m in spec.team_sizes:
            for strategy in spec.strategies:
                for r in range(spec.runs_per_cell):
                    seed = cell_seed(spec.base_seed, name, m, strategy, r)
                    tasks.append((map_token, m, strategy, seed, spec.overrides))
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            records = list(pool.map(_run_one, tasks, chunksize=1))
    else:
        grids: dict[str, OccupancyGrid] = {}
        records = []
        for map_token, m, strategy, seed, overrides in tasks:
            if map_token not in grids:
                grids[map_token] = resolve_map(map_token)
            config = make_config(m, strategy, seed, overrides)
            result = Simulation(grids[map_token], config).run()
            records.append(RunRecord(map_name_of(map_token), m, strategy, seed, result))
    rows = summarize(records)
    if out_dir is not None:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        write_runs_csv(records, out / "runs.csv")
        write_summary_csv(rows, out / "summary.csv")
        write_progression_csv(records, out / "progression.csv")
    return records, rows


def summarize(records: list[RunRecord]) -> list[SummaryRow]:
    """One row per (map, m, strategy) cell; delta_t on FBR rows with an FBE mate.

    Statistics cover successful runs only; faulted runs count toward the run
    total (and the fault column) but not toward R's numerator or the means.
    """
    cells: dict[tuple, list[RunRecord]] = {}
    for rec in records:
        cells.setdefault((rec.map_name, rec.m, rec.strategy), []).append(rec)
    mean_t_by_cell: dict[tuple, float] = {}
    rows = []
    for key in sorted(cells):
        recs = cells[key]
        total = len(recs)
        faults = sum(1 for r in recs if r.result.terminated_by == TERM_FAULT)
        succ = [r.result for r in recs if r.result.success]
        R = len(succ) / total
        if succ:
            times = np.array([r.t_rendezvous for r in succ], dtype=float)
            areas = np.array([r.area_union_m2 for r in succ], dtype=float)
            mean_t = float(times.mean())
            sigma_t = float(times.std())
            mean_area = float(areas.mean())
            mean_t_by_cell[key] = mean_t
        else:
            mean_t = sigma_t = mean_area = None
        rows.append(SummaryRow(key[0], key[1], key[2], total, R, mean_t, sigma_t, mean_area, None, faults))
    for row in rows:
        if row.strategy == "fbr" and row.mean_t:
            mate = mean_t_by_cell.get((row.map_name, row.m, "fbe"))
            if mate is not None:
                row.delta_t = mate / row.mean_t - 1.0
    return rows


def summarize_progression(results: list[RunResult], interval: float = 10.0) -> list[tuple[float, float]]:
    """Mean max-cluster-size curve: step-hold resample at fixed intervals."""
    if not results:
        raise ValueError("need at least one run")
    t_end = max(r.max_cluster_series[-1][0] for r in results)
    n_samples = int(math.ceil(t_end / interval))
    out = []
    for k in range(n_samples + 1):
        t = k * interval
        acc = 0.0
        for r in results:
            size = r.max_cluster_series[0][1]
            for ts, s in r.max_cluster_series:
                if ts <= t:
                    size = s
                else:
                    break
            acc += size
        out.append((t, acc / len(results)))
    return out


def _fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        return f"{v:.6f}"
    return str(v)


def write_runs_csv(records: list[RunRecord], path) -> None:
    max_m = max(rec.m for rec in records)
    header = (
        ["map", "m", "strategy", "seed", "success", "t_s", "fallback_excluded_s"]
        + [f"t{i}_s" for i in range(1, max_m + 1)]
        + ["area_union_m2", "area_intersection_m2", "total_distance_m", "terminated_by"]
    )
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for rec in records:
            res = rec.result
            partial = list(res.t_partial) + [None] * (max_m - rec.m)
            writer.writerow(
                [rec.map_name, rec.m, rec.strategy, rec.seed, _fmt(res.success),
                 _fmt(res.t_rendezvous), _fmt(res.fallback_time_excluded)]
                + [_fmt(t) for t in partial]
                + [_fmt(res.area_union_m2), _fmt(res.area_intersection_m2),
                   _fmt(res.total_distance_m), res.terminated_by]
            )


def write_summary_csv(rows: list[SummaryRow], path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["map", "m", "strategy", "runs", "R", "mean_t_s", "sigma_t_s",
                         "mean_area_m2", "delta_t", "faults"])
        for row in rows:
            writer.writerow([
                row.map_name, row.m, row.strategy, row.runs, _fmt(row.R),
                _fmt(row.mean_t), _fmt(row.sigma_t), _fmt(row.mean_area),
                _fmt(row.delta_t), row.faults,
            ])


def write_progression_csv(records: list[RunRecord], path, interval: float = 10.0) -> None:
    cells: dict[tuple, list[RunResult]] = {}
    for rec in records:
        cells.setdefault((rec.map_name, rec.m, rec.strategy), []).append(rec.result)
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["map", "m", "strategy", "time_s", "mean_max_cluster"])
        for key in sorted(cells):
            for t, size in summarize_progression(cells[key], interval):
                writer.writerow([key[0], key[1], key[2], _fmt(t), _fmt(size)])
