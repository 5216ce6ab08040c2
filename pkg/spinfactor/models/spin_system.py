"""
Pairwise spin systems, pinnings and conditional subsystems.

A system carries per-vertex spin domains (small integer labels), one
nonnegative interaction table per edge and one field table per vertex.
Hard constraints are exact zeros. Conditioning absorbs pinned interactions
into the vertex fields of the remaining vertices, so a conditioned system
is again a self-contained spin system on G[V \\ Lambda].
"""

import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import Any, Dict, Iterable, List, Mapping, Optional, Sequence, Tuple

import numpy as np  # type: ignore

from spinfactor.config import ENUMERATION_CAP
from spinfactor.exceptions import DomainError, InputValidationError, ResourceLimitError
from spinfactor.models.graph import Graph, VertexSet
from spinfactor.utils.logging_config import get_logger

logger = get_logger("spin_system")

EdgeKey = Tuple[int, int]


@dataclass(frozen=True)
class Pinning:
    """Partial assignment vertex -> spin label, stored sorted by vertex."""

    assignments: Tuple[Tuple[int, int], ...] = ()

    def __post_init__(self) -> None:
        vertices = [v for v, _ in self.assignments]
        if len(set(vertices)) != len(vertices):
            raise InputValidationError("pinned vertices must be distinct")
        if vertices != sorted(vertices):
            object.__setattr__(self, "assignments", tuple(sorted(self.assignments)))

    @classmethod
    def of(cls, mapping: Optional[Mapping[int, int]] = None) -> "Pinning":
        return cls(tuple(sorted((int(v), int(c)) for v, c in (mapping or {}).items())))

    @property
    def vertices(self) -> VertexSet:
        return tuple(v for v, _ in self.assignments)

    def as_dict(self) -> Dict[int, int]:
        return dict(self.assignments)

    def union(self, other: "Pinning") -> "Pinning":
        merged = self.as_dict()
        for v, c in other.assignments:
            if v in merged and merged[v] != c:
                raise InputValidationError(f"conflicting pins at vertex {v}")
            merged[v] = c
        return Pinning.of(merged)

    def __len__(self) -> int:
        return len(self.assignments)


@dataclass(frozen=True, eq=False)
class SpinSystem:
    """
    Pairwise spin system on a graph.

    ``edge_weights[(u, v)]`` with u < v is indexed [index of sigma_u, index of sigma_v];
    ``vertex_weights[v]`` is indexed by the position of a label in ``domains[v]``.
    ``origin`` maps vertices back to the ids of the system this one was
    conditioned from.
    """

    graph: Graph
    domains: Tuple[Tuple[int, ...], ...]
    edge_weights: Dict[EdgeKey, np.ndarray]
    vertex_weights: Tuple[np.ndarray, ...]
    model: str = "general"
    parameters: Dict[str, Any] = field(default_factory=dict)
    origin: Optional[Tuple[int, ...]] = None
    warnings: Tuple[str, ...] = ()

    def __post_init__(self) -> None:
        g = self.graph
        if len(self.domains) != g.n or len(self.vertex_weights) != g.n:
            raise InputValidationError("one domain and one field table per vertex required")
        for v, dom in enumerate(self.domains):
            if not dom:
                raise InputValidationError(f"empty spin domain at vertex {v}")
            if len(set(dom)) != len(dom):
                raise InputValidationError(f"duplicate spin labels at vertex {v}")
            psi = np.asarray(self.vertex_weights[v], dtype=float)
            if psi.shape != (len(dom),) or np.any(psi < 0) or not np.all(np.isfinite(psi)):
                raise InputValidationError(f"bad field table at vertex {v}")
        expected = set(g.edges())
        if set(self.edge_weights) != expected:
            raise InputValidationError("edge tables must match the graph's edges exactly")
        for (u, v), table in self.edge_weights.items():
            arr = np.asarray(table, dtype=float)
            if arr.shape != (len(self.domains[u]), len(self.domains[v])):
                raise InputValidationError(f"edge table ({u}, {v}) has wrong shape")
            if np.any(arr < 0) or not np.all(np.isfinite(arr)):
                raise InputValidationError(f"edge table ({u}, {v}) has negative entries")
        if self.origin is None:
            object.__setattr__(self, "origin", tuple(range(g.n)))

    @property
    def n(self) -> int:
        return self.graph.n

    @cached_property
    def label_index(self) -> Tuple[Dict[int, int], ...]:
        return tuple({c: i for i, c in enumerate(dom)} for dom in self.domains)

    @cached_property
    def domain_arrays(self) -> Tuple[np.ndarray, ...]:
        return tuple(np.asarray(dom, dtype=np.int64) for dom in self.domains)

    @property
    def domain_sizes(self) -> Tuple[int, ...]:
        return tuple(len(d) for d in self.domains)

    @property
    def raw_state_count(self) -> int:
        return math.prod(self.domain_sizes)

    def edge_table(self, u: int, v: int) -> np.ndarray:
        """Interaction table oriented as [sigma_u, sigma_v]."""
        if u < v:
            return self.edge_weights[(u, v)]
        return self.edge_weights[(v, u)].T

    def index_of(self, v: int, label: int) -> int:
        try:
            return self.label_index[v][label]
        except KeyError as exc:
            raise InputValidationError(f"spin {label} not in domain of vertex {v}") from exc

    def local_weights(self, v: int, indices: Sequence[int]) -> np.ndarray:
        """Unnormalised conditional weights of v given the neighbours' spin indices."""
        w = np.array(self.vertex_weights[v], dtype=float)
        for u in self.graph.neighbors(v):
            w = w * self.edge_table(u, v)[indices[u]]
        return w

    def weight(self, labels: Sequence[int]) -> float:
        """Unnormalised Gibbs weight of a full configuration given by labels."""
        idx = [self.index_of(v, c) for v, c in enumerate(labels)]
        total = 1.0
        for v in range(self.n):
            total *= float(self.vertex_weights[v][idx[v]])
        for (u, v), table in self.edge_weights.items():
            total *= float(table[idx[u], idx[v]])
        return total

    def validate_pinning(self, pin: Pinning) -> None:
        for v, c in pin.assignments:
            if not 0 <= v < self.n:
                raise InputValidationError(f"pinned vertex {v} out of range")
            self.index_of(v, c)


def iter_feasible_states(
    sys: SpinSystem, pin: Optional[Pinning] = None, cap: int = ENUMERATION_CAP
) -> Tuple[np.ndarray, np.ndarray]:
    """
    Branch-and-prune enumeration of positive-weight configurations.

    Vertices are extended in id order; partial assignments whose weight is
    already zero are dropped before the next vertex is added.

    Returns:
        (indices, weights): an (N, n) array of spin indices and the matching
        unnormalised weights.
    """
    if sys.raw_state_count > cap:
        raise ResourceLimitError(
            f"system has {sys.raw_state_count} raw assignments", "enumeration_cap", cap
        )
    fixed = {}
    if pin is not None:
        sys.validate_pinning(pin)
        fixed = {v: sys.index_of(v, c) for v, c in pin.assignments}

    states = np.zeros((1, 0), dtype=np.int64)
    weights = np.ones(1, dtype=float)
    for v in range(sys.n):
        choices = np.array([fixed[v]] if v in fixed else range(len(sys.domains[v])))
        k = len(choices)
        states = np.repeat(states, k, axis=0)
        spins = np.tile(choices, len(weights))
        mult = np.asarray(sys.vertex_weights[v], dtype=float)[spins]
        for u in sys.graph.neighbors(v):
            if u < v:
                mult = mult * sys.edge_weights[(u, v)][states[:, u], spins]
        weights = np.repeat(weights, k) * mult
        keep = weights > 0
        states = np.column_stack([states[keep], spins[keep]]).astype(np.int64)
        weights = weights[keep]
        if len(weights) == 0:
            return np.zeros((0, sys.n), dtype=np.int64), weights
    return states, weights


def is_feasible_pinning(sys: SpinSystem, pin: Pinning) -> bool:
    """True iff some completion of the pinning has positive weight."""
    _, weights = iter_feasible_states(sys, pin)
    return len(weights) > 0


def condition(sys: SpinSystem, pin: Pinning) -> SpinSystem:
    """Conditional system on G[V \\ Lambda] whose Gibbs measure is mu^eta."""
    if not is_feasible_pinning(sys, pin):
        raise DomainError(f"pinning {pin.as_dict()} is infeasible")
    pinned = pin.as_dict()
    free = [v for v in range(sys.n) if v not in pinned]
    new_id = {v: i for i, v in enumerate(free)}

    fields: List[np.ndarray] = []
    for v in free:
        psi = np.array(sys.vertex_weights[v], dtype=float)
        for u in sys.graph.neighbors(v):
            if u in pinned:
                psi = psi * sys.edge_table(u, v)[sys.index_of(u, pinned[u])]
        fields.append(psi)

    edges = {}
    for (u, v), table in sys.edge_weights.items():
        if u in new_id and v in new_id:
            edges[(new_id[u], new_id[v])] = np.array(table, dtype=float)
    graph = Graph.from_edges(len(free), edges.keys())
    return SpinSystem(
        graph=graph,
        domains=tuple(sys.domains[v] for v in free),
        edge_weights=edges,
        vertex_weights=tuple(fields),
        model=sys.model,
        parameters=dict(sys.parameters),
        origin=tuple(sys.origin[v] for v in free),  # type: ignore[index]
        warnings=sys.warnings,
    )


# Model constructors


def hardcore(g: Graph, lam: float) -> SpinSystem:
    """Hardcore model: spins {0, 1}, phi(1, 1) = 0, psi(1) = lambda."""
    if not lam > 0:
        raise InputValidationError(f"fugacity must be positive, got {lam}")
    blocked = np.array([[1.0, 1.0], [1.0, 0.0]])
    return SpinSystem(
        graph=g,
        domains=tuple((0, 1) for _ in range(g.n)),
        edge_weights={e: blocked.copy() for e in g.edges()},
        vertex_weights=tuple(np.array([1.0, float(lam)]) for _ in range(g.n)),
        model="hardcore",
        parameters={"lambda": float(lam)},
    )


def list_coloring(g: Graph, lists: Sequence[Iterable[int]]) -> SpinSystem:
    """Proper list colourings; warns when |L_v| < deg(v) + 2."""
    if len(lists) != g.n:
        raise InputValidationError("one colour list per vertex required")
    domains = []
    for v, raw in enumerate(lists):
        colours = tuple(sorted(set(int(c) for c in raw)))
        if not colours:
            raise InputValidationError(f"empty colour list at vertex {v}")
        domains.append(colours)

    edges = {}
    for u, v in g.edges():
        edges[(u, v)] = np.array(
            [[0.0 if a == b else 1.0 for b in domains[v]] for a in domains[u]]
        )

    warnings = tuple(
        f"vertex {v}: list size {len(domains[v])} < degree {g.degree(v)} + 2"
        for v in range(g.n)
        if len(domains[v]) < g.degree(v) + 2
    )
    for message in warnings:
        logger.warning("Glauber ergodicity slack missing at %s", message)
    return SpinSystem(
        graph=g,
        domains=tuple(domains),
        edge_weights=edges,
        vertex_weights=tuple(np.ones(len(d)) for d in domains),
        model="coloring",
        parameters={"q": max(len(d) for d in domains) if domains else 0},
        warnings=warnings,
    )


def uniform_coloring(g: Graph, q: int) -> SpinSystem:
    """Proper q-colourings with colours 1..q at every vertex."""
    if q < 1:
        raise InputValidationError("q must be >= 1")
    return list_coloring(g, [range(1, q + 1)] * g.n)


def general_system(
    g: Graph,
    domains: Sequence[Sequence[int]],
    vertex_weights: Sequence[Sequence[float]],
    edge_weights: Mapping[EdgeKey, Any],
) -> SpinSystem:
    """Explicit phi/psi tables; edge keys may be given in either orientation."""
    oriented = {}
    for (u, v), table in edge_weights.items():
        arr = np.asarray(table, dtype=float)
        if u > v:
            u, v, arr = v, u, arr.T
        oriented[(u, v)] = arr
    return SpinSystem(
        graph=g,
        domains=tuple(tuple(int(c) for c in d) for d in domains),
        edge_weights=oriented,
        vertex_weights=tuple(np.asarray(w, dtype=float) for w in vertex_weights),
    )


def product_system(fields: Sequence[Sequence[float]]) -> SpinSystem:
    """Independent spins on an edgeless graph, labels 0..k-1 per vertex."""
    g = Graph.from_edges(len(fields), [])
    return general_system(
        g, [tuple(range(len(w))) for w in fields], fields, {}
    )


# Model-config ingestion

MODEL_KINDS = ("hardcore", "coloring", "general")


def _edge_key(raw: str) -> EdgeKey:
    parts = raw.replace("-", ",").split(",")
    try:
        u, v = (int(p) for p in parts)
    except ValueError as exc:
        raise InputValidationError(f"edge key must look like 'u,v', got {raw!r}") from exc
    return u, v


def system_from_config(g: Graph, model: str, parameters: Mapping[str, Any]) -> SpinSystem:
    """
    Build a system from a parsed model config.

    hardcore: ``lambda``. coloring: ``q`` or per-vertex ``lists``.
    general: ``domains`` (shared or per vertex), ``fields`` (shared or per
    vertex) and either a shared ``interaction`` table or ``edge_tables``
    keyed ``"u,v"``.
    """
    if model == "hardcore":
        if "lambda" not in parameters:
            raise InputValidationError("hardcore model needs 'lambda'")
        return hardcore(g, float(parameters["lambda"]))
    if model == "coloring":
        if parameters.get("lists") is not None:
            return list_coloring(g, parameters["lists"])
        if parameters.get("q") is None:
            raise InputValidationError("coloring model needs 'q' or 'lists'")
        return uniform_coloring(g, int(parameters["q"]))
    if model != "general":
        raise InputValidationError(f"unknown model {model!r}; expected one of {MODEL_KINDS}")

    domains = parameters.get("domains")
    if domains is None:
        raise InputValidationError("general model needs 'domains'")
    if domains and not isinstance(domains[0], (list, tuple)):
        domains = [domains] * g.n
    fields = parameters.get("fields")
    if fields is None:
        fields = [[1.0] * len(d) for d in domains]
    elif fields and not isinstance(fields[0], (list, tuple)):
        fields = [fields] * g.n

    if parameters.get("edge_tables") is not None:
        tables = {_edge_key(k): v for k, v in parameters["edge_tables"].items()}
    elif parameters.get("interaction") is not None:
        tables = {e: parameters["interaction"] for e in g.edges()}
    else:
        raise InputValidationError("general model needs 'interaction' or 'edge_tables'")
    return general_system(g, domains, fields, tables)
