"""
Graphs and pairwise spin systems.
"""

from .graph import Graph, ball, induced_ball, load_graph
from .spin_system import Pinning, SpinSystem, condition, hardcore, list_coloring, uniform_coloring

__all__ = [
    "Graph",
    "ball",
    "induced_ball",
    "load_graph",
    "Pinning",
    "SpinSystem",
    "condition",
    "hardcore",
    "list_coloring",
    "uniform_coloring",
]
