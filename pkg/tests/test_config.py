"""
Base test configuration and shared instances for the SpinFactor test suite.
"""

import os
import sys
from typing import Dict

import numpy as np

# Add the project root to the Python path
PROJECT_ROOT = os.path.dirname(os.path.dirname(__file__))
sys.path.insert(0, PROJECT_ROOT)

from spinfactor.models.graph import (  # noqa: E402
    Graph,
    complete_graph,
    cycle_graph,
    dary_tree,
    grid_graph,
    path_graph,
    star_graph,
)
from spinfactor.models.spin_system import (  # noqa: E402
    SpinSystem,
    hardcore,
    product_system,
    uniform_coloring,
)

# Tolerances used across the suites
IDENTITY_TOL = 1e-10
AUDIT_TOL = 1e-9

SAMPLE_EDGE_LIST = """# path on five vertices
0 1
1 2
2 3
3 4
"""

SAMPLE_MODEL_CONFIGS: Dict[str, Dict] = {
    "hardcore": {"model": "hardcore", "lambda": 1.0},
    "coloring": {"model": "coloring", "q": 4},
    "general": {
        "model": "general",
        "domains": [0, 1],
        "fields": [1.0, 2.0],
        "interaction": [[2.0, 1.0], [1.0, 2.0]],
    },
}


def sample_graphs() -> Dict[str, Graph]:
    """Small graphs used by several suites."""
    return {
        "K2": path_graph(2),
        "P3": path_graph(3),
        "P5": path_graph(5),
        "P8": path_graph(8),
        "C5": cycle_graph(5),
        "triangle": complete_graph(3),
        "star3": star_graph(3),
        "grid3": grid_graph(3, 3),
        "grid4": grid_graph(4, 4),
        "tree2_2": dary_tree(2, 2),
        "tree2_3": dary_tree(2, 3),
    }


def hardcore_path(n: int, lam: float = 1.0) -> SpinSystem:
    return hardcore(path_graph(n), lam)


def triangle_coloring(q: int = 4) -> SpinSystem:
    return uniform_coloring(complete_graph(3), q)


def sample_product(sizes=(2, 3, 2)) -> SpinSystem:
    """Independent spins with unequal fields."""
    return product_system([list(np.arange(1, k + 1, dtype=float)) for k in sizes])
