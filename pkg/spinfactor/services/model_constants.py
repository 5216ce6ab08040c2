"""
Closed-form node constants for the hardcore model and list colourings.

The closed forms hold uniformly over pinnings and bound the variance
factorisation constants of a separator-tree node.
"""

import itertools
from dataclasses import dataclass
from typing import Any, Dict, Iterable, Optional

from spinfactor.config import COLORING_MIN_DELTA
from spinfactor.exceptions import DomainError, InputValidationError
from spinfactor.models.spin_system import Pinning, SpinSystem
from spinfactor.services.exact_engine import GibbsTable
from spinfactor.utils.logging_config import get_logger

logger = get_logger("model_constants")

HARDCORE_SPLIT_TAG = "hardcore-separator-split"
HARDCORE_BLOCK_TAG = "hardcore-block-at"
COLORING_SPLIT_TAG = "coloring-ball-split"
COLORING_BLOCK_TAG = "coloring-ball-at"


@dataclass(frozen=True)
class NodeConstants:
    c_us: float
    c_s: float
    split_tag: str
    block_tag: str

    def to_dict(self) -> Dict[str, Any]:
        return {
            "C_US": self.c_us,
            "C_S": self.c_s,
            "split_tag": self.split_tag,
            "block_tag": self.block_tag,
        }


def _require_model(sys: SpinSystem, model: str) -> None:
    if sys.model != model:
        raise DomainError(f"expected a {model} system, got {sys.model!r}")


def hardcore_node_constants(
    sys: SpinSystem, u: Iterable[int], s: Iterable[int], block_size: Optional[int] = None
) -> NodeConstants:
    """
    C_US = 2 (1 + lambda)^|S| and C_S = (1 + lambda)^(k - 1), where k is the
    size of the block that needs tensorisation (|S| unless given).
    """
    _require_model(sys, "hardcore")
    members = set(sys.graph.vertex_set(u))
    separator = sys.graph.vertex_set(s)
    if not set(separator) <= members:
        raise InputValidationError("separator must lie inside U")
    lam = float(sys.parameters["lambda"])
    k = len(separator) if block_size is None else block_size
    return NodeConstants(
        c_us=2.0 * (1.0 + lam) ** len(separator),
        c_s=(1.0 + lam) ** max(k - 1, 0),
        split_tag=HARDCORE_SPLIT_TAG,
        block_tag=HARDCORE_BLOCK_TAG,
    )


def effective_degree(sys: SpinSystem) -> int:
    return max(COLORING_MIN_DELTA, sys.graph.max_degree)


def check_coloring_slack(sys: SpinSystem) -> None:
    """Raise DomainError unless every list has at least deg(v) + 2 colours."""
    _require_model(sys, "coloring")
    for v in sys.graph.vertices:
        if len(sys.domains[v]) < sys.graph.degree(v) + 2:
            raise DomainError(
                f"vertex {v}: list size {len(sys.domains[v])} < degree {sys.graph.degree(v)} + 2"
            )


def coloring_node_constants(
    sys: SpinSystem,
    u: Iterable[int],
    s: Iterable[int],
    delta: Optional[int] = None,
    q: Optional[int] = None,
    block_size: Optional[int] = None,
) -> NodeConstants:
    """
    C_US = 2 (2^Delta q)^|S| and C_S = (2^Delta q)^(k - 1) with k = |B_U(S, 1)|
    unless given. Delta defaults to max(3, max degree), q to the largest list.
    """
    check_coloring_slack(sys)
    members = set(sys.graph.vertex_set(u))
    separator = sys.graph.vertex_set(s)
    if not set(separator) <= members:
        raise InputValidationError("separator must lie inside U")
    delta = effective_degree(sys) if delta is None else delta
    q = max(sys.domain_sizes) if q is None else q
    base = (2.0 ** delta) * q
    k = len(separator) if block_size is None else block_size
    return NodeConstants(
        c_us=2.0 * base ** len(separator),
        c_s=base ** max(k - 1, 0),
        split_tag=COLORING_SPLIT_TAG,
        block_tag=COLORING_BLOCK_TAG,
    )


def coloring_marginal_lower_bound(delta: int, q: int) -> float:
    """Every feasible (v, c) under any pinning has marginal >= 1 / (2^Delta q)."""
    if delta < 0 or q < 1:
        raise InputValidationError("need Delta >= 0 and q >= 1")
    return 1.0 / ((2.0 ** max(delta, COLORING_MIN_DELTA)) * q)


@dataclass(frozen=True)
class MarginalWitness:
    value: float
    pinning: Pinning
    vertex: int
    label: int


def min_conditional_marginal(t: GibbsTable) -> MarginalWitness:
    """
    Smallest single-site marginal of a feasible spin over every feasible
    pinning of every proper subset of the free vertices.
    """
    best: Optional[MarginalWitness] = None
    for size in range(t.n):
        for subset in itertools.combinations(t.free_vertices, size):
            for pin, conditional in t.pinnings(subset):
                for v in conditional.free_vertices:
                    grouping = conditional.grouping((v,))
                    g = int(grouping.mass.argmin())
                    value = float(grouping.mass[g])
                    if best is None or value < best.value:
                        best = MarginalWitness(value, pin, v, int(grouping.keys[g][0]))
    if best is None:
        raise InputValidationError("table has no free vertices")
    logger.debug("Minimum conditional marginal %.6g at vertex %d", best.value, best.vertex)
    return best

