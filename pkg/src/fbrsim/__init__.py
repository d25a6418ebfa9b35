"""Deterministic 2D multi-robot rendezvous/exploration simulator."""

from .gridworld import GridPath, OccupancyGrid, Pose, line_of_sight, load_map, plan_path, raycast
from .perception import KnownMap, LidarScan, integrate_scan, merge_maps, simulate_lidar
from .frontier import Frontier, FrontierSet, extract_frontiers, frontier_score, select_frontier
from .decay import DecayEvent, ExplorationTrace, TracePose, merge_traces
from .team import (
    Cluster,
    ClusterSet,
    CommGraph,
    build_comm_graph,
    elect_leader,
    formation_targets,
    on_merge,
    update_clusters,
)
from .simulator import RunResult, SimConfig, Simulation, SpawnError, run, spawn
from .mapgen import MapGenError, generate_map
from .harness import ExperimentSpec, SummaryRow, run_batch, summarize_progression
from .report import render_report

__version__ = "0.1.0"
