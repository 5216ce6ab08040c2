"""
Separator decomposition trees and low-diameter cluster partitions.

Balanced separators come from a min-fill tree decomposition first and an
exhaustive search over small subsets second. Cluster partitions carve
geometric-radius balls in the distance-2r power graph and are accepted only
after both diameter and coverage conditions are measured.
"""

import itertools
import math
from dataclasses import dataclass, replace
from typing import Any, Dict, List, Optional, Sequence, Tuple

import networkx as nx  # type: ignore
import numpy as np  # type: ignore
from networkx.algorithms.approximation import treewidth_min_fill_in  # type: ignore

from spinfactor.config import (
    BAG_SUBSET_LIMIT,
    BALANCE_RATIO,
    DEFAULT_LEAF_SIZE,
    EXHAUSTIVE_SEPARATOR_LIMIT,
    LINIAL_SAKS_P,
    LINIAL_SAKS_RETRY_CAP,
    PARTITION_BOUND_MIN_N,
)
from spinfactor.exceptions import ComputationError, InputValidationError, SeparatorNotFoundError
from spinfactor.models.graph import (
    Graph,
    VertexSet,
    ball,
    connected_components,
    distance_power,
    induced_ball,
    induced_diameter,
)
from spinfactor.utils.logging_config import get_logger
from spinfactor.utils.parallel import ordered_map, resolve_thread_count

logger = get_logger("decomposition")


@dataclass(frozen=True)
class TreeNode:
    """A node (U, S) of a separator decomposition tree."""

    index: int
    vertices: VertexSet
    separator: VertexSet
    parent: Optional[int]
    children: Tuple[int, ...] = ()

    @property
    def is_leaf(self) -> bool:
        return self.separator == self.vertices

    def to_dict(self) -> Dict[str, Any]:
        return {
            "index": self.index,
            "U": list(self.vertices),
            "S": list(self.separator),
            "parent": self.parent,
            "children": list(self.children),
        }


@dataclass(frozen=True)
class SeparatorTree:
    """Separator decomposition tree; node 0 is the root and covers V."""

    nodes: Tuple[TreeNode, ...]
    n: int
    budget: Optional[int] = None
    construction: str = "balanced"

    @property
    def root(self) -> TreeNode:
        return self.nodes[0]

    def depth(self, index: int) -> int:
        return len(self.path(index)) - 1

    @property
    def height(self) -> int:
        return max(self.depth(node.index) for node in self.nodes)

    def path(self, index: int) -> List[int]:
        """Node indices from the root down to ``index``."""
        out = [index]
        while self.nodes[out[-1]].parent is not None:
            out.append(self.nodes[out[-1]].parent)
            if len(out) > len(self.nodes):
                raise InputValidationError("parent pointers contain a cycle")
        return out[::-1]

    def leaves(self) -> List[TreeNode]:
        return [node for node in self.nodes if node.is_leaf]

    def internal_nodes(self) -> List[TreeNode]:
        return [node for node in self.nodes if not node.is_leaf]

    def to_dict(self) -> Dict[str, Any]:
        return {
            "n": self.n,
            "budget": self.budget,
            "construction": self.construction,
            "height": self.height,
            "nodes": [node.to_dict() for node in self.nodes],
        }

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "SeparatorTree":
        nodes = tuple(
            TreeNode(
                index=int(item["index"]),
                vertices=tuple(sorted(item["U"])),
                separator=tuple(sorted(item["S"])),
                parent=item["parent"],
                children=tuple(item["children"]),
            )
            for item in data["nodes"]
        )
        return cls(nodes, int(data["n"]), data.get("budget"), data.get("construction", "balanced"))


# Balanced separators


def _is_balanced_split(part_size: int, total: int) -> bool:
    return part_size <= BALANCE_RATIO * total + 1e-12


def _largest_component(g: Graph, members: Sequence[int]) -> int:
    return max((len(c) for c in connected_components(g, members)), default=0)


def _separator_key(g: Graph, u: VertexSet, candidate: VertexSet) -> Optional[Tuple[int, int, VertexSet]]:
    """Sort key (size, largest component, vertices) or None when unbalanced."""
    chosen = set(candidate)
    rest = [v for v in u if v not in chosen]
    largest = _largest_component(g, rest)
    if not _is_balanced_split(largest, len(u)):
        return None
    return (len(candidate), largest, candidate)


def _bag_candidates(g: Graph, u: VertexSet, budget: int) -> set:
    subgraph = nx.Graph(g.nx_graph.subgraph(u))
    if subgraph.number_of_edges() == 0:
        return {(v,) for v in u}
    _, decomposition = treewidth_min_fill_in(subgraph)
    candidates = set()
    bags = [tuple(sorted(bag)) for bag in decomposition.nodes()]
    for bag in bags:
        candidates.add(bag)
        if len(bag) <= BAG_SUBSET_LIMIT:
            for size in range(1, min(budget, len(bag)) + 1):
                candidates.update(itertools.combinations(bag, size))
    for first, second in decomposition.edges():
        overlap = tuple(sorted(set(first) & set(second)))
        if overlap:
            candidates.add(overlap)
    # isolated vertices of G[u] are not covered by any bag
    covered = set(itertools.chain.from_iterable(bags))
    candidates.update((v,) for v in u if v not in covered)
    return {c for c in candidates if 1 <= len(c) <= budget}


def _best(g: Graph, u: VertexSet, candidates) -> Optional[VertexSet]:
    keyed = [key for key in (_separator_key(g, u, c) for c in candidates) if key is not None]
    return min(keyed)[2] if keyed else None


def balanced_separator(g: Graph, u: Sequence[int], budget: int) -> Optional[VertexSet]:
    """
    A nonempty S within u, |S| <= budget, leaving components of at most 2|u|/3.

    Ties break on size, then the largest remaining component, then the
    sorted vertex tuple. Returns None when nothing within budget exists.
    """
    members = g.vertex_set(u)
    if not members:
        raise InputValidationError("separator search needs a nonempty vertex set")
    if budget < 1:
        raise InputValidationError("separator budget must be >= 1")

    found = _best(g, members, _bag_candidates(g, members, budget))
    if found is not None:
        return found
    if len(members) <= EXHAUSTIVE_SEPARATOR_LIMIT:
        exhaustive = (
            c for size in range(1, min(budget, len(members)) + 1)
            for c in itertools.combinations(members, size)
        )
        found = _best(g, members, exhaustive)
        if found is not None:
            logger.debug("Exhaustive search found separator %s for |U|=%d", found, len(members))
        return found
    return None


def build_separator_tree(
    g: Graph, budget: int, leaf_size: int = DEFAULT_LEAF_SIZE
) -> SeparatorTree:
    """Recursive balanced separator decomposition; raises SeparatorNotFoundError."""
    if budget < 1 or leaf_size < 1:
        raise InputValidationError("budget and leaf_size must be >= 1")
    if g.n == 0:
        raise InputValidationError("cannot decompose an empty graph")

    records: List[Dict[str, Any]] = []
    queue: List[Tuple[VertexSet, Optional[int]]] = [(g.vertices, None)]
    while queue:
        u, parent = queue.pop(0)
        index = len(records)
        if len(u) <= leaf_size:
            separator = u
        else:
            separator = balanced_separator(g, u, budget)
            if separator is None:
                raise SeparatorNotFoundError(u, budget)
        records.append({"U": u, "S": separator, "parent": parent, "children": []})
        if parent is not None:
            records[parent]["children"].append(index)
        rest = [v for v in u if v not in set(separator)]
        queue.extend((component, index) for component in connected_components(g, rest))

    tree = SeparatorTree(
        nodes=tuple(
            TreeNode(i, r["U"], r["S"], r["parent"], tuple(r["children"]))
            for i, r in enumerate(records)
        ),
        n=g.n,
        budget=budget,
    )
    logger.info("Built separator tree: %d nodes, height %d", len(tree.nodes), tree.height)
    return tree


def subtree_separator_tree(g: Graph, root: int = 0) -> SeparatorTree:
    """For a tree graph: one node (T_v, {v}) per vertex, T_v the subtree under v."""
    if g.n == 0 or not nx.is_tree(g.nx_graph):
        raise InputValidationError("subtree separator tree needs a connected acyclic graph")
    (root,) = g.vertex_set([root])
    order = list(nx.bfs_tree(g.nx_graph, root))
    parent_of = dict(nx.bfs_predecessors(g.nx_graph, root))
    node_index = {v: i for i, v in enumerate(order)}
    subtree: Dict[int, set] = {v: {v} for v in order}
    for v in reversed(order[1:]):
        subtree[parent_of[v]] |= subtree[v]
    children: Dict[int, List[int]] = {v: [] for v in order}
    for v in order[1:]:
        children[parent_of[v]].append(node_index[v])
    nodes = tuple(
        TreeNode(
            index=node_index[v],
            vertices=tuple(sorted(subtree[v])),
            separator=(v,),
            parent=node_index[parent_of[v]] if v in parent_of else None,
            children=tuple(sorted(children[v])),
        )
        for v in order
    )
    return SeparatorTree(nodes=nodes, n=g.n, budget=1, construction="subtree")


def tree_coverage(g: Graph, tree: SeparatorTree, r: int) -> Dict[int, int]:
    """For each vertex, the number of nodes (U, S) with v in B_U(S, r)."""
    counts = {v: 0 for v in g.vertices}
    for node in tree.nodes:
        region = node.separator if r == 0 else induced_ball(g, node.vertices, node.separator, r)
        for v in region:
            counts[v] += 1
    return counts


# Verification


@dataclass(frozen=True)
class ConditionResult:
    name: str
    passed: bool
    witness: Optional[Any] = None

    def to_dict(self) -> Dict[str, Any]:
        return {"name": self.name, "passed": self.passed, "witness": self.witness}


@dataclass(frozen=True)
class VerificationReport:
    conditions: Tuple[ConditionResult, ...]

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.conditions)

    def get(self, name: str) -> ConditionResult:
        for condition in self.conditions:
            if condition.name == name:
                return condition
        raise KeyError(name)

    def failures(self) -> List[ConditionResult]:
        return [c for c in self.conditions if not c.passed]

    def to_dict(self) -> Dict[str, Any]:
        return {"passed": self.passed, "conditions": [c.to_dict() for c in self.conditions]}


def verify_tree(g: Graph, tree: SeparatorTree) -> VerificationReport:
    """Re-check every structural invariant of a separator tree."""
    nodes = tree.nodes
    conditions: List[ConditionResult] = []

    root_ok = bool(nodes) and nodes[0].parent is None and nodes[0].vertices == g.vertices
    conditions.append(ConditionResult("root-covers-V", root_ok, None if root_ok else "root U != V"))

    bad_sep = [n.index for n in nodes if not n.separator or not set(n.separator) <= set(n.vertices)]
    conditions.append(ConditionResult("separator-in-node", not bad_sep, bad_sep or None))

    bad_children = None
    for node in nodes:
        rest = [v for v in node.vertices if v not in set(node.separator)]
        expected = sorted(connected_components(g, rest))
        actual = sorted(nodes[c].vertices for c in node.children)
        linked = all(nodes[c].parent == node.index for c in node.children)
        if expected != actual or not linked:
            bad_children = {"node": node.index, "expected": expected, "actual": actual}
            break
    conditions.append(ConditionResult("component-children", bad_children is None, bad_children))

    seen: Dict[int, int] = {}
    overlap = None
    for node in nodes:
        for v in node.separator:
            if v in seen and overlap is None:
                overlap = {"vertex": v, "nodes": [seen[v], node.index]}
            seen.setdefault(v, node.index)
    missing = [v for v in g.vertices if v not in seen]
    partition_ok = overlap is None and not missing and len(seen) == g.n
    conditions.append(
        ConditionResult(
            "separators-partition-V",
            partition_ok,
            None if partition_ok else {"overlap": overlap, "missing": missing},
        )
    )

    unbalanced = [
        {"node": node.index, "child": c}
        for node in nodes
        for c in node.children
        if not _is_balanced_split(len(nodes[c].vertices), len(node.vertices))
    ]
    conditions.append(ConditionResult("balance", not unbalanced, unbalanced[:1] or None))

    if tree.budget is not None:
        oversized = [n.index for n in nodes if not n.is_leaf and len(n.separator) > tree.budget]
        conditions.append(ConditionResult("separator-budget", not oversized, oversized or None))

    if g.n >= 2:
        bound = 3.0 * math.log2(g.n)
        height = tree.height
        conditions.append(
            ConditionResult("height-bound", height < bound, {"height": height, "bound": bound})
        )
    return VerificationReport(tuple(conditions))


# Low-diameter partitions


@dataclass(frozen=True)
class ClusterPartition:
    clusters: Tuple[VertexSet, ...]
    radius: int
    seed: Optional[int] = None
    attempts: int = 1
    phases: int = 0

    def __post_init__(self) -> None:
        seen: set = set()
        for cluster in self.clusters:
            if seen & set(cluster):
                raise InputValidationError("clusters must be disjoint")
            seen |= set(cluster)

    def to_dict(self) -> Dict[str, Any]:
        return {
            "radius": self.radius,
            "seed": self.seed,
            "attempts": self.attempts,
            "phases": self.phases,
            "clusters": [list(c) for c in self.clusters],
        }


def _carve(g: Graph, power: Graph, r: int, rng: np.random.Generator) -> Tuple[List[VertexSet], int]:
    """
    Ball carving in the power graph: each phase visits the remaining vertices
    in random order, grows a ball from a geometric starting radius until the
    next layer at most doubles it, and defers that layer to the next phase.
    """
    cap = int(math.floor(math.log2(g.n) / 2.0)) if g.n > 1 else 0
    remaining = set(g.vertices)
    clusters: List[VertexSet] = []
    phases = 0
    while remaining:
        phases += 1
        available = set(remaining)
        for center in rng.permutation(sorted(remaining)):
            center = int(center)
            if center not in available:
                continue
            start = min(int(rng.geometric(LINIAL_SAKS_P)) - 1, cap)
            lengths = nx.single_source_shortest_path_length(
                power.nx_graph.subgraph(available), center
            )
            layers = np.bincount(np.fromiter(lengths.values(), dtype=np.int64))
            sizes = np.cumsum(layers)
            radius = min(start, len(sizes) - 1)
            while radius + 1 < len(sizes) and sizes[radius + 1] > 2 * sizes[radius]:
                radius += 1
            cluster = tuple(sorted(v for v, d in lengths.items() if d <= radius))
            deferred = {v for v, d in lengths.items() if d == radius + 1}
            clusters.append(cluster)
            available -= set(cluster) | deferred
            remaining -= set(cluster)
    return clusters, phases


def _attempt(g: Graph, power: Graph, r: int, seed_seq: np.random.SeedSequence) -> ClusterPartition:
    rng = np.random.default_rng(seed_seq)
    clusters, phases = _carve(g, power, r, rng)
    return ClusterPartition(tuple(sorted(clusters)), r, phases=phases)


def low_diameter_partition(
    g: Graph,
    r: int,
    seed: int = 0,
    workers: Optional[int] = 1,
    retry_cap: int = LINIAL_SAKS_RETRY_CAP,
) -> ClusterPartition:
    """
    Partition V into clusters with diam(G[B(V_i, r)]) <= 6 r log2 n + 2r and
    every vertex in at most 2 log2 n balls B(V_i, r). Both conditions are
    measured on each attempt (for n >= 10); the first passing attempt by
    index wins.
    """
    if r < 1:
        raise InputValidationError("partition radius must be >= 1")
    if g.n == 0:
        raise InputValidationError("cannot partition an empty graph")
    power = distance_power(g, 2 * r)
    streams = np.random.SeedSequence(seed).spawn(retry_cap)
    batch = resolve_thread_count(workers)
    for offset in range(0, retry_cap, batch):
        chunk = list(enumerate(streams[offset:offset + batch], start=offset))
        results = ordered_map(lambda item: _attempt(g, power, r, item[1]), chunk, batch)
        for (attempt, _), partition in zip(chunk, results):
            report = verify_partition(g, partition)
            if report.passed:
                logger.info(
                    "Low-diameter partition: %d clusters, %d phases, attempt %d",
                    len(partition.clusters), partition.phases, attempt + 1,
                )
                return replace(partition, seed=seed, attempts=attempt + 1)
            logger.debug("Partition attempt %d rejected: %s", attempt + 1, report.failures())
    raise ComputationError(f"low-diameter partition not verified after {retry_cap} attempts")


def partition_coverage(g: Graph, part: ClusterPartition) -> Dict[int, int]:
    counts = {v: 0 for v in g.vertices}
    for cluster in part.clusters:
        for v in ball(g, cluster, part.radius):
            counts[v] += 1
    return counts


def verify_partition(g: Graph, part: ClusterPartition) -> VerificationReport:
    """Partition-of-V always; diameter, coverage and power-diameter bounds when n >= 10."""
    covered = sorted(v for c in part.clusters for v in c)
    partition_ok = covered == list(g.vertices) and all(part.clusters)
    conditions = [
        ConditionResult(
            "partition-of-V",
            partition_ok,
            None if partition_ok else {"missing": sorted(set(g.vertices) - set(covered))},
        )
    ]
    if g.n < PARTITION_BOUND_MIN_N or not partition_ok:
        return VerificationReport(tuple(conditions))

    log_n = math.log2(g.n)
    r = part.radius
    diameter_bound = 6.0 * r * log_n + 2.0 * r
    diameters = [induced_diameter(g, ball(g, c, r)) for c in part.clusters]
    worst = int(np.argmax(diameters))
    conditions.append(
        ConditionResult(
            "cluster-diameter",
            diameters[worst] <= diameter_bound,
            {"cluster": worst, "diameter": diameters[worst], "bound": diameter_bound},
        )
    )

    counts = partition_coverage(g, part)
    vertex = max(counts, key=lambda v: (counts[v], -v))
    conditions.append(
        ConditionResult(
            "coverage",
            counts[vertex] <= 2.0 * log_n,
            {"vertex": vertex, "count": counts[vertex], "bound": 2.0 * log_n},
        )
    )

    power = distance_power(g, 2 * r)
    power_diameters = [induced_diameter(power, c) for c in part.clusters]
    worst_power = int(np.argmax(power_diameters))
    conditions.append(
        ConditionResult(
            "power-diameter",
            power_diameters[worst_power] <= 3.0 * log_n,
            {"cluster": worst_power, "diameter": power_diameters[worst_power], "bound": 3.0 * log_n},
        )
    )
    return VerificationReport(tuple(conditions))
