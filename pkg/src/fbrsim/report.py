"""Render figures from a batch output directory, next to its CSV files."""

from __future__ import annotations

import csv
from collections import defaultdict
from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt

_COLORS = {"fbr": "#1f77b4", "fbe": "#d62728"}


def _read_csv(path: Path) -> list[dict]:
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def render_report(out_dir) -> list[Path]:
    """Write summary and progression figures alongside the batch CSVs.

    Expects summary.csv and progression.csv in out_dir (as written by
    run_batch); returns the list of figure paths produced.
    """
    out = Path(out_dir)
    written: list[Path] = []
    summary = _read_csv(out / "summary.csv")
    progression_path = out / "progression.csv"
    progression = _read_csv(progression_path) if progression_path.exists() else []

    by_map = defaultdict(list)
    for row in summary:
        by_map[row["map"]].append(row)
    for map_name, rows in sorted(by_map.items()):
        ms = sorted({int(r["m"]) for r in rows})
        strategies = sorted({r["strategy"] for r in rows})
        width = 0.8 / max(len(strategies), 1)

        fig, ax = plt.subplots(figsize=(6, 4))
        for k, strat in enumerate(strategies):
            xs, ys, errs = [], [], []
            for i, m in enumerate(ms):
                row = next((r for r in rows if int(r["m"]) == m and r["strategy"] == strat), None)
                if row is None or not row["mean_t_s"]:
                    continue
                xs.append(i + (k - (len(strategies) - 1) / 2) * width)
                ys.append(float(row["mean_t_s"]))
                errs.append(float(row["sigma_t_s"]) if row["sigma_t_s"] else 0.0)
            if xs:
                ax.bar(xs, ys, width=width, yerr=errs, capsize=3,
                       label=strat.upper(), color=_COLORS.get(strat))
        ax.set_xticks(range(len(ms)))
        ax.set_xticklabels([str(m) for m in ms])
        ax.set_xlabel("team size m")
        ax.set_ylabel("mean rendezvous time (s)")
        ax.set_title(f"{map_name}: rendezvous time")
        ax.legend()
        fig.tight_layout()
        path = out / f"times_{map_name}.png"
        fig.savefig(path, dpi=120)
        plt.close(fig)
        written.append(path)

        fig, ax = plt.subplots(figsize=(6, 4))
        for k, strat in enumerate(strategies):
            xs, ys = [], []
            for i, m in enumerate(ms):
                row = next((r for r in rows if int(r["m"]) == m and r["strategy"] == strat), None)
                if row is None or not row["mean_area_m2"]:
                    continue
                xs.append(i + (k - (len(strategies) - 1) / 2) * width)
                ys.append(float(row["mean_area_m2"]))
            if xs:
                ax.bar(xs, ys, width=width, label=strat.upper(), color=_COLORS.get(strat))
        ax.set_xticks(range(len(ms)))
        ax.set_xticklabels([str(m) for m in ms])
        ax.set_xlabel("team size m")
        ax.set_ylabel("mean explored area (m²)")
        ax.set_title(f"{map_name}: explored area at rendezvous")
        ax.legend()
        fig.tight_layout()
        path = out / f"area_{map_name}.png"
        fig.savefig(path, dpi=120)
        plt.close(fig)
        written.append(path)

    curves = defaultdict(lambda: defaultdict(list))
    for row in progression:
        curves[(row["map"], int(row["m"]))][row["strategy"]].append(
            (float(row["time_s"]), float(row["mean_max_cluster"]))
        )
    for (map_name, m), per_strategy in sorted(curves.items()):
        fig, ax = plt.subplots(figsize=(6, 4))
        for strat, pts in sorted(per_strategy.items()):
            pts.sort()
            ax.step([p[0] for p in pts], [p[1] for p in pts], where="post",
                    label=strat.upper(), color=_COLORS.get(strat))
        ax.set_xlabel("time (s)")
        ax.set_ylabel("mean largest cluster size")
        ax.set_ylim(bottom=0.9)
        ax.set_title(f"{map_name}, m={m}: cluster growth")
        ax.legend()
        fig.tight_layout()
        path = out / f"progression_{map_name}_m{m}.png"
        fig.savefig(path, dpi=120)
        plt.close(fig)
        written.append(path)
    return written
