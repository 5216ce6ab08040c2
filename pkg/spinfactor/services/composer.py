"""
Recursive composition of factorisation constants along a separator tree.

Each node (U, S) needs a constant for the split {B_U(S, r), U \\ S} and one
for tensorising over the ball B_U(S, r). Both must hold uniformly over
pinnings of the vertices outside, so every strategy takes the maximum over
the feasible pinnings (or over a seeded sample, flagged in the report).
The composed multiplier is A times the largest C_S times the product of
split constants along the root path.
"""

import math
from dataclasses import dataclass, field, replace
from typing import Any, Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np  # type: ignore

from spinfactor.config import (
    AUDIT_RELATIVE_TOLERANCE,
    DEFAULT_AUDIT_FUNCTIONS,
    DEFAULT_STRATEGY_ORDER,
    DENSE_EIGEN_CAP,
    ENUMERATION_CAP,
    KNOWN_STRATEGIES,
    PINNING_EXHAUSTIVE_CAP,
    PINNING_SAMPLE_SIZE,
    ZERO_TOLERANCE,
)
from spinfactor.exceptions import (
    CompositionError,
    DomainError,
    InputValidationError,
    ResourceLimitError,
)
from spinfactor.models.graph import VertexSet, induced_ball
from spinfactor.models.spin_system import SpinSystem
from spinfactor.services.decomposition import SeparatorTree, TreeNode, tree_coverage, verify_tree
from spinfactor.services.exact_engine import (
    KINDS,
    VARIANCE,
    GibbsTable,
    enumerate_gibbs,
    functional,
    optimal_at_variance_constant,
    optimal_block_variance_constant,
    site_functional_sum,
)
from spinfactor.services.factorisation_bounds import (
    TwoBlockView,
    crude_multivariable_constant,
    strong_correlation_constant,
    weak_correlation_constant,
)
from spinfactor.services.model_constants import coloring_node_constants, hardcore_node_constants
from spinfactor.utils.data_processor import random_test_functions
from spinfactor.utils.logging_config import get_logger
from spinfactor.utils.parallel import ordered_map

logger = get_logger("composer")

LEAF_TAG = "leaf"
TRIVIAL_COVER_TAG = "trivial-cover"
SINGLE_SITE_TAG = "single-site"

StrategyResult = Tuple[Optional[float], str]

STRUCTURAL_CONDITIONS = (
    "root-covers-V",
    "separator-in-node",
    "component-children",
    "separators-partition-V",
)


@dataclass
class _NodeContext:
    """Lazily built conditional tables for one tree node."""

    sys: SpinSystem
    table: GibbsTable
    node: TreeNode
    ball: VertexSet
    far: VertexSet
    kind: str
    radius: int
    rng: np.random.Generator
    pinning_cap: int
    sample_size: int
    sampled: bool = False
    _split_tables: Optional[List[GibbsTable]] = field(default=None, repr=False)
    _block_tables: Optional[List[GibbsTable]] = field(default=None, repr=False)

    def _conditionals(self, inside: Sequence[int]) -> List[GibbsTable]:
        outside = self.table.complement(inside)
        count = self.table.pinning_count(outside)
        if count <= self.pinning_cap:
            return [conditional for _, conditional in self.table.pinnings(outside)]
        self.sampled = True
        chosen = np.sort(self.rng.choice(count, size=min(self.sample_size, count), replace=False))
        logger.warning(
            "Node %d: sampling %d of %d pinnings", self.node.index, len(chosen), count
        )
        return [self.table.conditional_on_group(outside, int(g))[1] for g in chosen]

    @property
    def split_tables(self) -> List[GibbsTable]:
        """Tables on S u T, one per pinning of V \\ U."""
        if self._split_tables is None:
            tables = self._conditionals(self.node.vertices)
            kept = tuple(sorted(self.node.separator + self.far))
            if kept != self.node.vertices:
                tables = [t.marginal(kept) for t in tables]
            self._split_tables = tables
        return self._split_tables

    @property
    def block_tables(self) -> List[GibbsTable]:
        """Tables on the ball, one per pinning of its complement."""
        if self._block_tables is None:
            self._block_tables = self._conditionals(self.ball)
        return self._block_tables


@dataclass(frozen=True)
class NodeReport:
    index: int
    vertices: VertexSet
    separator: VertexSet
    ball: VertexSet
    far: VertexSet
    c_us: float
    c_s: float
    split_tag: str
    block_tag: str
    sampled: bool = False
    skipped: Dict[str, str] = field(default_factory=dict)

    def to_dict(self) -> Dict[str, Any]:
        return {
            "index": self.index,
            "U": list(self.vertices),
            "S": list(self.separator),
            "ball": list(self.ball),
            "T": list(self.far),
            "C_US": self.c_us,
            "C_S": self.c_s,
            "split_tag": self.split_tag,
            "block_tag": self.block_tag,
            "sampled": self.sampled,
            "skipped": dict(self.skipped),
        }


@dataclass(frozen=True)
class FactorizationReport:
    tree: SeparatorTree
    nodes: Tuple[NodeReport, ...]
    coverage_A: float
    coverage_source: str
    measured_coverage: int
    composed_C: float
    radius: int
    kind: str
    strategy_order: Tuple[str, ...]
    worst_node: int

    @property
    def sampled(self) -> bool:
        return any(node.sampled for node in self.nodes)

    @property
    def coverage_exceeded(self) -> bool:
        """Some vertex lies in more node balls than the bound A allows."""
        return self.measured_coverage > self.coverage_A + 1e-9

    def path_product(self, index: int) -> float:
        """C_S of the node times the split constants from the root down to it."""
        product = self.nodes[index].c_s
        for step in self.tree.path(index):
            product *= self.nodes[step].c_us
        return product

    def to_dict(self) -> Dict[str, Any]:
        return {
            "kind": self.kind,
            "radius_r": self.radius,
            "strategy_order": list(self.strategy_order),
            "coverage_A": self.coverage_A,
            "coverage_source": self.coverage_source,
            "measured_coverage": self.measured_coverage,
            "coverage_exceeded": self.coverage_exceeded,
            "composed_C": self.composed_C,
            "worst_node": self.worst_node,
            "sampled": self.sampled,
            "tree": self.tree.to_dict(),
            "per_node": [node.to_dict() for node in self.nodes],
        }


def coverage_bound(
    max_degree: int, tree: SeparatorTree, r: int, balanced: bool
) -> Tuple[float, str]:
    """
    Bound on |{(U, S): v in B_U(S, r)}|: 1 when r = 0, otherwise the least of
    height + 1, 4 log2 n for balanced trees with n >= 3, and the ball size
    1 + Delta sum_{i<r} (Delta - 1)^i.
    """
    if r == 0:
        return 1.0, "separators-partition"
    candidates = [(float(tree.height + 1), "tree-height")]
    if balanced and tree.n >= 3:
        candidates.append((4.0 * math.log2(tree.n), "balanced-tree"))
    ball_size = 1 + max_degree * sum((max_degree - 1) ** i for i in range(r))
    candidates.append((float(ball_size), "degree-ball"))
    return min(candidates)


class FactorisationComposer:
    """
    Computes per-node constants with the first applicable strategy and
    composes them along a separator decomposition tree.
    """

    def __init__(
        self,
        strategy_order: Sequence[str] = DEFAULT_STRATEGY_ORDER,
        pinning_cap: int = PINNING_EXHAUSTIVE_CAP,
        sample_size: int = PINNING_SAMPLE_SIZE,
        seed: int = 0,
        workers: Optional[int] = 1,
        enumeration_cap: int = ENUMERATION_CAP,
    ) -> None:
        unknown = [s for s in strategy_order if s not in KNOWN_STRATEGIES]
        if unknown or not strategy_order:
            raise InputValidationError(f"unknown or empty strategy order: {unknown}")
        self.strategy_order = tuple(strategy_order)
        self.pinning_cap = pinning_cap
        self.sample_size = sample_size
        self.seed = seed
        self.workers = workers
        self.enumeration_cap = enumeration_cap

        self._split_strategies: Dict[str, Callable[[_NodeContext], StrategyResult]] = {
            "model-closed-form": self._closed_form_split,
            "measured-weak": self._weak_split,
            "measured-strong": self._strong_split,
            "measured-crude": lambda ctx: (None, "crude constant is a single-site statement"),
            "exact-variance": self._exact_split,
        }
        self._block_strategies: Dict[str, Callable[[_NodeContext], StrategyResult]] = {
            "model-closed-form": self._closed_form_block,
            "measured-weak": self._weak_block,
            "measured-strong": self._strong_block,
            "measured-crude": self._crude_block,
            "exact-variance": self._exact_block,
        }

    # Public API

    def compose(
        self, sys: SpinSystem, tree: SeparatorTree, r: int, kind: str,
        table: Optional[GibbsTable] = None,
    ) -> FactorizationReport:
        """Composition with balls of radius r and the coverage factor A."""
        return self._compose(sys, tree, r, kind, table)

    def compose_separator(
        self, sys: SpinSystem, tree: SeparatorTree, kind: str,
        table: Optional[GibbsTable] = None,
    ) -> FactorizationReport:
        """Composition on the separators themselves: blocks {S, U \\ S}, A = 1."""
        return self._compose(sys, tree, 0, kind, table)

    def audit(
        self,
        report: FactorizationReport,
        table: GibbsTable,
        functions: int = DEFAULT_AUDIT_FUNCTIONS,
        seed: int = 0,
    ) -> "AuditSummary":
        return audit_report(report, table, functions, seed, self.workers)

    # Composition

    def _compose(
        self, sys: SpinSystem, tree: SeparatorTree, r: int, kind: str, table: Optional[GibbsTable]
    ) -> FactorizationReport:
        if kind not in KINDS:
            raise InputValidationError(f"unknown functional kind {kind!r}")
        if r < 0:
            raise InputValidationError("radius must be >= 0")
        if tree.n != sys.n:
            raise InputValidationError("tree and system have different vertex counts")
        verification = verify_tree(sys.graph, tree)
        broken = [c.name for c in verification.conditions if c.name in STRUCTURAL_CONDITIONS and not c.passed]
        if broken:
            raise InputValidationError(f"separator tree is malformed: {broken}")

        table = table if table is not None else enumerate_gibbs(sys, self.enumeration_cap)
        streams = np.random.SeedSequence(self.seed).spawn(len(tree.nodes))
        contexts = [
            self._context(sys, table, node, r, kind, np.random.default_rng(stream))
            for node, stream in zip(tree.nodes, streams)
        ]
        node_reports = ordered_map(self._node_report, contexts, self.workers)

        balanced = verification.get("balance").passed
        coverage_A, source = coverage_bound(sys.graph.max_degree, tree, r, balanced)
        counts = tree_coverage(sys.graph, tree, r)
        measured = max(counts.values())
        if measured > coverage_A + 1e-9:
            logger.warning("Measured coverage %d exceeds bound %.3f", measured, coverage_A)

        partial = FactorizationReport(
            tree=tree,
            nodes=tuple(node_reports),
            coverage_A=coverage_A,
            coverage_source=source,
            measured_coverage=measured,
            composed_C=math.nan,
            radius=r,
            kind=kind,
            strategy_order=self.strategy_order,
            worst_node=0,
        )
        products = [partial.path_product(node.index) for node in tree.nodes]
        worst = int(np.argmax(products))
        composed = max(1.0, coverage_A * products[worst])
        logger.info(
            "Composed %s multiplier %.6g (A=%.3g, r=%d, %d nodes)",
            kind, composed, coverage_A, r, len(tree.nodes),
        )
        return replace(partial, composed_C=composed, worst_node=worst)

    def _context(
        self, sys: SpinSystem, table: GibbsTable, node: TreeNode, r: int, kind: str,
        rng: np.random.Generator,
    ) -> _NodeContext:
        ball = node.separator if r == 0 else induced_ball(sys.graph, node.vertices, node.separator, r)
        far = tuple(v for v in node.vertices if v not in set(ball))
        return _NodeContext(
            sys=sys, table=table, node=node, ball=ball, far=far, kind=kind, radius=r,
            rng=rng, pinning_cap=self.pinning_cap, sample_size=self.sample_size,
        )

    def _node_report(self, ctx: _NodeContext) -> NodeReport:
        skipped: Dict[str, str] = {}
        node = ctx.node
        if node.is_leaf:
            c_us, split_tag = 1.0, LEAF_TAG
        elif not ctx.far:
            c_us, split_tag = 1.0, TRIVIAL_COVER_TAG
        else:
            c_us, split_tag = self._first_applicable(ctx, self._split_strategies, skipped, "split")

        if len(ctx.ball) == 1:
            c_s, block_tag = 1.0, SINGLE_SITE_TAG
        else:
            c_s, block_tag = self._first_applicable(ctx, self._block_strategies, skipped, "block")

        logger.debug(
            "Node %d: C_US=%.6g (%s), C_S=%.6g (%s)", node.index, c_us, split_tag, c_s, block_tag
        )
        return NodeReport(
            index=node.index,
            vertices=node.vertices,
            separator=node.separator,
            ball=ctx.ball,
            far=ctx.far,
            c_us=c_us,
            c_s=c_s,
            split_tag=split_tag,
            block_tag=block_tag,
            sampled=ctx.sampled,
            skipped=skipped,
        )

    def _first_applicable(
        self,
        ctx: _NodeContext,
        strategies: Dict[str, Callable[[_NodeContext], StrategyResult]],
        skipped: Dict[str, str],
        role: str,
    ) -> Tuple[float, str]:
        for name in self.strategy_order:
            try:
                constant, tag = strategies[name](ctx)
            except DomainError as exc:
                constant, tag = None, str(exc)
            except ResourceLimitError as exc:
                constant, tag = None, f"{exc.cap_name} exceeded: {exc}"
            if constant is not None and math.isfinite(constant):
                return max(1.0, constant), tag
            skipped[f"{role}:{name}"] = tag
        raise CompositionError(ctx.node.index, skipped)

    # Split strategies: blocks S and T = U \ B_U(S, r) of the marginal on S u T

    def _closed_form_split(self, ctx: _NodeContext) -> StrategyResult:
        if ctx.kind != VARIANCE:
            return None, "closed forms are variance statements"
        node = ctx.node
        if ctx.sys.model == "hardcore":
            constants = hardcore_node_constants(ctx.sys, node.vertices, node.separator)
            return constants.c_us, constants.split_tag
        if ctx.sys.model == "coloring":
            if ctx.radius < 1:
                return None, "colouring split needs r >= 1"
            constants = coloring_node_constants(ctx.sys, node.vertices, node.separator)
            return constants.c_us, constants.split_tag
        return None, f"no closed form for model {ctx.sys.model!r}"

    def _views(self, ctx: _NodeContext) -> List[TwoBlockView]:
        return [TwoBlockView.of(t, ctx.node.separator, ctx.far) for t in ctx.split_tables]

    def _weak_split(self, ctx: _NodeContext) -> StrategyResult:
        return _max_weak(self._views(ctx))

    def _strong_split(self, ctx: _NodeContext) -> StrategyResult:
        return _max_strong(self._views(ctx), ctx.kind)

    def _exact_split(self, ctx: _NodeContext) -> StrategyResult:
        if ctx.kind != VARIANCE:
            return None, "exact oracle covers variance only"
        blocks = [ctx.node.separator, ctx.far]
        worst = max(optimal_block_variance_constant(t, blocks) for t in ctx.split_tables)
        if math.isinf(worst):
            return None, "blocks do not mix under some pinning"
        return worst, "exact-variance"

    # Block strategies: tensorisation over B_U(S, r)

    def _closed_form_block(self, ctx: _NodeContext) -> StrategyResult:
        if ctx.kind != VARIANCE:
            return None, "closed forms are variance statements"
        node = ctx.node
        size = len(ctx.ball)
        if ctx.sys.model == "hardcore":
            constants = hardcore_node_constants(ctx.sys, node.vertices, node.separator, size)
            return constants.c_s, constants.block_tag
        if ctx.sys.model == "coloring":
            constants = coloring_node_constants(ctx.sys, node.vertices, node.separator, block_size=size)
            return constants.c_s, constants.block_tag
        return None, f"no closed form for model {ctx.sys.model!r}"

    def _pair_views(self, ctx: _NodeContext) -> Optional[List[TwoBlockView]]:
        if len(ctx.ball) != 2:
            return None
        first, second = ctx.ball
        return [TwoBlockView.of(t, (first,), (second,)) for t in ctx.block_tables]

    def _weak_block(self, ctx: _NodeContext) -> StrategyResult:
        views = self._pair_views(ctx)
        if views is None:
            return None, "two-block statement needs a two-vertex ball"
        return _max_weak(views)

    def _strong_block(self, ctx: _NodeContext) -> StrategyResult:
        views = self._pair_views(ctx)
        if views is None:
            return None, "two-block statement needs a two-vertex ball"
        return _max_strong(views, ctx.kind)

    def _crude_block(self, ctx: _NodeContext) -> StrategyResult:
        worst = 0.0
        for t in ctx.block_tables:
            if t.n < 2:
                continue
            result = crude_multivariable_constant(t)
            if not result.applicable:
                return None, result.reason
            worst = max(worst, result.constant(ctx.kind))
        return worst, "measured-crude"

    def _exact_block(self, ctx: _NodeContext) -> StrategyResult:
        if ctx.kind != VARIANCE:
            return None, "exact oracle covers variance only"
        worst = max(optimal_at_variance_constant(t) for t in ctx.block_tables)
        if math.isinf(worst):
            return None, "Glauber dynamics on the ball is reducible under some pinning"
        return worst, "exact-variance"


def _max_weak(views: List[TwoBlockView]) -> StrategyResult:
    worst = 0.0
    for view in views:
        result = weak_correlation_constant(view)
        if not result.applicable:
            return None, result.reason
        worst = max(worst, result.constant)
    return worst, "measured-weak"


def _max_strong(views: List[TwoBlockView], kind: str) -> StrategyResult:
    worst = 0.0
    for view in views:
        result = strong_correlation_constant(view)
        if not result.applicable:
            return None, result.reason
        worst = max(worst, result.constant(kind))
    return worst, "measured-strong"


def compose_at(
    sys: SpinSystem,
    tree: SeparatorTree,
    r: int = 0,
    kind: str = VARIANCE,
    strategy: Sequence[str] = DEFAULT_STRATEGY_ORDER,
    **options: Any,
) -> FactorizationReport:
    return FactorisationComposer(strategy, **options).compose(sys, tree, r, kind)


# Audits


@dataclass(frozen=True)
class AuditSummary:
    kind: str
    constant: float
    functions: int
    violations: int
    max_ratio: float
    min_relative_slack: float
    optimal_constant: Optional[float] = None
    coverage_exceeded: bool = False

    @property
    def dominates_optimal(self) -> Optional[bool]:
        if self.optimal_constant is None:
            return None
        if math.isinf(self.optimal_constant):
            return math.isinf(self.constant)
        return self.constant >= self.optimal_constant - 1e-9 * max(1.0, self.optimal_constant)

    @property
    def passed(self) -> bool:
        return (
            self.violations == 0
            and self.dominates_optimal is not False
            and not self.coverage_exceeded
        )

    def to_dict(self) -> Dict[str, Any]:
        return {
            "kind": self.kind,
            "constant": self.constant,
            "functions": self.functions,
            "violations": self.violations,
            "max_ratio": self.max_ratio,
            "min_relative_slack": self.min_relative_slack,
            "optimal_constant": self.optimal_constant,
            "dominates_optimal": self.dominates_optimal,
            "coverage_exceeded": self.coverage_exceeded,
        }


def _audit_one(table: GibbsTable, f: np.ndarray, kind: str, constant: float) -> Tuple[bool, float, float]:
    lhs = functional(table, f, kind)
    site_sum = site_functional_sum(table, f, kind)
    rhs = constant * site_sum if site_sum > 0 else 0.0
    violated = lhs > rhs * (1.0 + AUDIT_RELATIVE_TOLERANCE) + ZERO_TOLERANCE
    ratio = lhs / site_sum if site_sum > ZERO_TOLERANCE else 0.0
    scale = max(abs(lhs), abs(rhs), ZERO_TOLERANCE)
    return violated, ratio, (rhs - lhs) / scale


def audit_multiplier(
    table: GibbsTable,
    constant: float,
    kind: str,
    functions: int = DEFAULT_AUDIT_FUNCTIONS,
    seed: int = 0,
    workers: Optional[int] = 1,
    with_optimal: bool = True,
) -> AuditSummary:
    """Check F f <= C sum_v E[F_v f] on random test functions."""
    rng = np.random.default_rng(seed)
    samples = random_test_functions(table.size, functions, kind, rng)
    outcomes = ordered_map(lambda f: _audit_one(table, f, kind, constant), list(samples), workers)
    optimal = None
    if with_optimal and kind == VARIANCE and table.size <= DENSE_EIGEN_CAP:
        optimal = optimal_at_variance_constant(table)
    return AuditSummary(
        kind=kind,
        constant=constant,
        functions=functions,
        violations=sum(1 for violated, _, _ in outcomes if violated),
        max_ratio=max((ratio for _, ratio, _ in outcomes), default=0.0),
        min_relative_slack=min((slack for _, _, slack in outcomes), default=math.inf),
        optimal_constant=optimal,
    )


def audit_report(
    report: FactorizationReport,
    table: GibbsTable,
    functions: int = DEFAULT_AUDIT_FUNCTIONS,
    seed: int = 0,
    workers: Optional[int] = 1,
) -> AuditSummary:
    summary = audit_multiplier(table, report.composed_C, report.kind, functions, seed, workers)
    if report.coverage_exceeded:
        summary = replace(summary, coverage_exceeded=True)
    logger.info(
        "Audit: %d violations / %d functions (max ratio %.6g)",
        summary.violations, summary.functions, summary.max_ratio,
    )
    return summary
