"""
Random test functions, random instance suites and report export.
"""

import json
import math
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence, Union

import numpy as np  # type: ignore
import pandas as pd  # type: ignore

from spinfactor import __version__
from spinfactor.config import ENTROPY_FUNCTION_RANGE, VARIANCE_FUNCTION_RANGE
from spinfactor.exceptions import InputValidationError
from spinfactor.models.graph import Graph, erdos_renyi, path_graph
from spinfactor.models.spin_system import SpinSystem, general_system, hardcore, list_coloring
from spinfactor.utils.logging_config import get_logger

logger = get_logger("data_processor")


def random_test_functions(
    size: int, count: int, kind: str, rng: np.random.Generator
) -> np.ndarray:
    """
    ``count`` random functions on ``size`` configurations: uniform on
    [-1, 1] for variance, uniform on [0.1, 2] for entropy.
    """
    if count < 0 or size < 1:
        raise InputValidationError("need size >= 1 and count >= 0")
    low, high = ENTROPY_FUNCTION_RANGE if kind == "ent" else VARIANCE_FUNCTION_RANGE
    return rng.uniform(low, high, size=(count, size))


def _to_builtin(value: Any) -> Any:
    """Make numpy scalars, tuples and non-finite floats JSON friendly."""
    if isinstance(value, dict):
        return {str(k): _to_builtin(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_to_builtin(v) for v in value]
    if isinstance(value, np.ndarray):
        return _to_builtin(value.tolist())
    if isinstance(value, (np.integer,)):
        return int(value)
    if isinstance(value, (np.floating, float)):
        number = float(value)
        if math.isnan(number):
            return "nan"
        if math.isinf(number):
            return "inf" if number > 0 else "-inf"
        return number
    return value


class DataProcessor:
    """
    Utility class for random instances, summary statistics and report files
    """

    def __init__(self, seed: int = 0):
        self.seed = seed
        self.rng = np.random.default_rng(seed)
        self.fugacities = (0.5, 1.0, 2.0)
        self.colour_counts = (3, 4, 5)

    def random_test_functions(self, size: int, count: int, kind: str) -> np.ndarray:
        return random_test_functions(size, count, kind, self.rng)

    def random_hardcore(self, max_vertices: int = 6) -> SpinSystem:
        """Hardcore model on a random small graph (a path when the draw is empty)."""
        n = int(self.rng.integers(2, max_vertices + 1))
        graph = erdos_renyi(n, 0.5, int(self.rng.integers(0, 2**31 - 1)))
        if not graph.edges():
            graph = path_graph(n)
        lam = float(self.rng.choice(self.fugacities))
        return hardcore(graph, lam)

    def random_coloring(self, max_vertices: int = 5) -> SpinSystem:
        """List colouring with |L_v| >= deg(v) + 2 on a random small graph."""
        n = int(self.rng.integers(2, max_vertices + 1))
        graph = erdos_renyi(n, 0.4, int(self.rng.integers(0, 2**31 - 1)))
        q = max(int(self.rng.choice(self.colour_counts)), graph.max_degree + 2)
        return list_coloring(graph, [range(1, q + 1)] * n)

    def random_soft_system(self, max_vertices: int = 5, spins: int = 2) -> SpinSystem:
        """Strictly positive interactions and fields on a random small graph."""
        n = int(self.rng.integers(2, max_vertices + 1))
        graph = erdos_renyi(n, 0.5, int(self.rng.integers(0, 2**31 - 1)))
        if not graph.edges():
            graph = path_graph(n)
        domains = [tuple(range(spins))] * n
        fields = [self.rng.uniform(0.5, 2.0, size=spins) for _ in range(n)]
        edges = {e: self.rng.uniform(0.5, 2.0, size=(spins, spins)) for e in graph.edges()}
        return general_system(graph, domains, fields, edges)

    def generate_instance_suite(self, count: int = 10, max_vertices: int = 6) -> List[Dict[str, Any]]:
        """
        Generate a mixed suite of small instances.

        Args:
            count: Number of instances
            max_vertices: Largest vertex count drawn

        Returns:
            List of dictionaries with a name and a spin system
        """
        makers = (self.random_hardcore, self.random_coloring, self.random_soft_system)
        suite: List[Dict[str, Any]] = []
        for i in range(count):
            maker = makers[i % len(makers)]
            system = maker(max_vertices)
            suite.append({"name": f"{system.model}-{i}", "system": system})
        return suite

    def calculate_statistics(self, values: Sequence[float]) -> Dict[str, Any]:
        """
        Summary statistics of a list of measurements (finite values only).
        """
        finite = [float(v) for v in values if math.isfinite(float(v))]
        if not finite:
            return {"count": len(values), "finite": 0}
        arr = np.asarray(finite)
        return {
            "count": len(values),
            "finite": len(finite),
            "mean": float(arr.mean()),
            "std": float(arr.std()),
            "min": float(arr.min()),
            "max": float(arr.max()),
        }

    def export_analysis_results(
        self, results: Dict[str, Any], analysis_type: str, config: Optional[Dict[str, Any]] = None
    ) -> Dict[str, Any]:
        """
        Wrap command results with version metadata and the effective config.

        No timestamps: identical inputs give identical reports.
        """
        return _to_builtin(
            {
                "results": results,
                "config": config or {},
                "metadata": {
                    "version": __version__,
                    "analysis_type": analysis_type,
                },
            }
        )

    def write_report(self, report: Dict[str, Any], path: Union[str, Path]) -> Path:
        """JSON with sorted keys so reruns are byte-identical."""
        target = Path(path)
        target.parent.mkdir(parents=True, exist_ok=True)
        target.write_text(json.dumps(_to_builtin(report), indent=2, sort_keys=True) + "\n")
        logger.info("Wrote report %s", target)
        return target

    def write_curve(
        self, rows: Sequence[Sequence[Any]], columns: Sequence[str], path: Union[str, Path]
    ) -> Path:
        """Plot-ready CSV (for example t, tv or t, coalesced_fraction)."""
        target = Path(path)
        target.parent.mkdir(parents=True, exist_ok=True)
        frame = pd.DataFrame(list(rows), columns=list(columns))
        frame.to_csv(target, index=False, float_format="%.12g")
        logger.info("Wrote %d rows to %s", len(frame), target)
        return target


def graph_summary(g: Graph) -> Dict[str, Any]:
    return {"n": g.n, "m": len(g.edges()), "max_degree": g.max_degree}
