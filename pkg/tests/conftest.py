import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from fbrsim.gridworld import OccupancyGrid, load_map


def grid_from_rows(rows, resolution=0.1, force_border=False) -> OccupancyGrid:
    """Build a grid from '#'/'.' strings (row 0 = y 0)."""
    text = f"resolution {resolution}\n" + "\n".join(rows) + "\n"
    return load_map(text, force_border=force_border)


def random_known_cells(rng, w, h, p_unknown=0.4, p_obstacle=0.2) -> np.ndarray:
    """Random tri-state map array for property tests."""
    draw = rng.random((h, w))
    cells = np.full((h, w), 1, dtype=np.uint8)  # FREE
    cells[draw < p_unknown] = 0  # UNKNOWN
    cells[draw > 1.0 - p_obstacle] = 2  # OBSTACLE
    return cells


@pytest.fixture(scope="session")
def open_arena() -> OccupancyGrid:
    """10 m x 10 m free square with a wall border."""
    rows = ["#" * 100] + ["#" + "." * 98 + "#"] * 98 + ["#" * 100]
    return grid_from_rows(rows)
