"""
Undirected simple graphs with the metric operations the decomposition
machinery needs: balls, induced components, induced diameters and distance
powers. Adjacency is stored as sorted tuples; networkx does the traversal.
"""

import math
import numbers
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path
from typing import Dict, Iterable, List, Optional, Sequence, Tuple, Union

import networkx as nx  # type: ignore

from spinfactor.exceptions import InputValidationError
from spinfactor.utils.logging_config import get_logger

logger = get_logger("graph")

VertexSet = Tuple[int, ...]


@dataclass(frozen=True)
class Graph:
    """Simple undirected graph on vertices 0..n-1."""

    n: int
    adjacency: Tuple[Tuple[int, ...], ...]
    labels: Optional[Tuple[str, ...]] = field(default=None, compare=False)

    def __post_init__(self) -> None:
        if self.n < 0 or len(self.adjacency) != self.n:
            raise InputValidationError("adjacency must have one entry per vertex")
        for v, nbrs in enumerate(self.adjacency):
            if list(nbrs) != sorted(set(nbrs)):
                raise InputValidationError(f"neighbours of {v} must be sorted and unique")
            for u in nbrs:
                if u == v:
                    raise InputValidationError(f"self-loop at vertex {v}")
                if not 0 <= u < self.n or v not in self.adjacency[u]:
                    raise InputValidationError(f"asymmetric or invalid edge {v}-{u}")

    @classmethod
    def from_edges(
        cls, n: int, edges: Iterable[Tuple[int, int]], labels: Optional[Sequence[str]] = None
    ) -> "Graph":
        """Build a graph from an edge list, ignoring duplicate edges."""
        nbrs: List[set] = [set() for _ in range(n)]
        for u, v in edges:
            if not (0 <= u < n and 0 <= v < n):
                raise InputValidationError(f"edge ({u}, {v}) out of range for n={n}")
            if u == v:
                raise InputValidationError(f"self-loop at vertex {u}")
            nbrs[u].add(v)
            nbrs[v].add(u)
        return cls(
            n=n,
            adjacency=tuple(tuple(sorted(s)) for s in nbrs),
            labels=tuple(labels) if labels is not None else None,
        )

    @classmethod
    def from_networkx(cls, graph: "nx.Graph") -> "Graph":
        """Convert a networkx graph whose nodes are sortable to dense ids."""
        order = sorted(graph.nodes())
        index = {node: i for i, node in enumerate(order)}
        edges = [(index[a], index[b]) for a, b in graph.edges() if a != b]
        return cls.from_edges(len(order), edges)

    @cached_property
    def nx_graph(self) -> "nx.Graph":
        graph = nx.Graph()
        graph.add_nodes_from(range(self.n))
        graph.add_edges_from(self.edges())
        return graph

    @property
    def vertices(self) -> VertexSet:
        return tuple(range(self.n))

    def neighbors(self, v: int) -> Tuple[int, ...]:
        return self.adjacency[v]

    def degree(self, v: int) -> int:
        return len(self.adjacency[v])

    @property
    def max_degree(self) -> int:
        return max((len(a) for a in self.adjacency), default=0)

    def edges(self) -> List[Tuple[int, int]]:
        return [(u, v) for u in range(self.n) for v in self.adjacency[u] if u < v]

    def has_edge(self, u: int, v: int) -> bool:
        return v in self.adjacency[u]

    def vertex_set(self, members: Iterable[int]) -> VertexSet:
        """Validate ids and return them as a sorted, duplicate-free tuple."""
        out = set()
        for v in members:
            if not isinstance(v, numbers.Integral) or isinstance(v, bool) or not 0 <= v < self.n:
                raise InputValidationError(f"invalid vertex id {v!r} for n={self.n}")
            out.add(int(v))
        return tuple(sorted(out))


def ball(g: Graph, s: Iterable[int], r: int) -> VertexSet:
    """Vertices within graph distance r of the set s."""
    sources = g.vertex_set(s)
    if not sources:
        raise InputValidationError("ball centre set must be nonempty")
    if r < 0:
        raise InputValidationError("ball radius must be nonnegative")
    reached = nx.multi_source_dijkstra_path_length(g.nx_graph, set(sources), cutoff=r)
    return tuple(sorted(reached))


def induced_ball(g: Graph, u: Iterable[int], s: Iterable[int], r: int) -> VertexSet:
    """B_U(S, r): the ball around s intersected with u."""
    members = set(g.vertex_set(u))
    return tuple(v for v in ball(g, s, r) if v in members)


def connected_components(g: Graph, u: Iterable[int]) -> List[VertexSet]:
    """Components of G[u], ordered by smallest vertex id."""
    members = g.vertex_set(u)
    if not members:
        return []
    parts = nx.connected_components(g.nx_graph.subgraph(members))
    return sorted((tuple(sorted(c)) for c in parts), key=lambda c: c[0])


def induced_diameter(g: Graph, u: Iterable[int]) -> float:
    """Diameter of G[u]; math.inf when G[u] is disconnected."""
    members = g.vertex_set(u)
    if not members:
        raise InputValidationError("diameter of an empty vertex set is undefined")
    if len(members) == 1:
        return 0
    sub = g.nx_graph.subgraph(members)
    if not nx.is_connected(sub):
        return math.inf
    return nx.diameter(sub)


def distance_power(g: Graph, k: int) -> Graph:
    """Graph joining u, v whenever 1 <= dist_G(u, v) <= k."""
    if k < 1:
        raise InputValidationError("distance power requires k >= 1")
    if k == 1 or g.n == 0:
        return g
    return Graph.from_networkx(nx.power(g.nx_graph, k))


def distance(g: Graph, v: int, targets: Iterable[int]) -> float:
    """dist_G(v, W); math.inf when no target is reachable."""
    wanted = set(g.vertex_set(targets))
    lengths = nx.single_source_shortest_path_length(g.nx_graph, v)
    return min((d for w, d in lengths.items() if w in wanted), default=math.inf)


# Generators


def path_graph(n: int) -> Graph:
    return Graph.from_networkx(nx.path_graph(n))


def cycle_graph(n: int) -> Graph:
    if n < 3:
        raise InputValidationError("cycle requires n >= 3")
    return Graph.from_networkx(nx.cycle_graph(n))


def complete_graph(n: int) -> Graph:
    return Graph.from_networkx(nx.complete_graph(n))


def star_graph(leaves: int) -> Graph:
    """K_{1,leaves} with centre 0."""
    return Graph.from_networkx(nx.star_graph(leaves))


def grid_graph(width: int, height: int) -> Graph:
    """width x height grid; vertex (x, y) gets id x * height + y."""
    if width < 1 or height < 1:
        raise InputValidationError("grid dimensions must be positive")
    return Graph.from_networkx(nx.grid_2d_graph(width, height))


def dary_tree(d: int, height: int) -> Graph:
    """Complete d-ary tree of the given height, root 0, BFS numbering."""
    if d < 1 or height < 0:
        raise InputValidationError("d-ary tree requires d >= 1 and height >= 0")
    return Graph.from_networkx(nx.balanced_tree(d, height))


def erdos_renyi(n: int, p: float, seed: int) -> Graph:
    if not 0.0 <= p <= 1.0:
        raise InputValidationError("edge probability must lie in [0, 1]")
    return Graph.from_networkx(nx.gnp_random_graph(n, p, seed=seed))


GENERATORS = {
    "path": (path_graph, (int,)),
    "cycle": (cycle_graph, (int,)),
    "complete": (complete_graph, (int,)),
    "star": (star_graph, (int,)),
    "grid": (grid_graph, (int, int)),
    "tree": (dary_tree, (int, int)),
    "gnp": (erdos_renyi, (int, float, int)),
}


def generate(spec: str) -> Graph:
    """
    Build a graph from a generator spec such as ``path:8``, ``grid:4x4``,
    ``tree:2:3`` (d, height) or ``gnp:30:0.1:7`` (n, p, seed).
    """
    name, _, rest = spec.partition(":")
    if name not in GENERATORS:
        raise InputValidationError(f"unknown graph generator {name!r}")
    fn, types = GENERATORS[name]
    raw = [a for a in rest.replace("x", ":").split(":") if a]
    if len(raw) != len(types):
        raise InputValidationError(
            f"generator {name!r} expects {len(types)} parameters, got {spec!r}"
        )
    try:
        args = [t(a) for t, a in zip(types, raw)]
    except ValueError as exc:
        raise InputValidationError(f"bad generator parameters in {spec!r}") from exc
    return fn(*args)


def is_generator_spec(source: str) -> bool:
    return source.partition(":")[0] in GENERATORS and ":" in source


def parse_edge_list(text: str) -> Graph:
    """
    Parse ``u v`` lines (``#`` starts a comment). A line with a single token
    declares an isolated vertex. Integer names keep their numeric order;
    other names are numbered by first appearance.
    """
    pairs: List[Tuple[str, ...]] = []
    names: Dict[str, None] = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        tokens = line.split("#", 1)[0].split()
        if not tokens:
            continue
        if len(tokens) > 2:
            raise InputValidationError(f"line {lineno}: expected 'u v', got {line!r}")
        for tok in tokens:
            names.setdefault(tok, None)
        pairs.append(tuple(tokens))

    order = list(names)
    if all(_is_int(name) for name in order):
        order.sort(key=int)
    index = {name: i for i, name in enumerate(order)}
    edges = []
    for tokens in pairs:
        if len(tokens) == 2:
            if tokens[0] == tokens[1]:
                raise InputValidationError(f"self-loop at vertex {tokens[0]}")
            edges.append((index[tokens[0]], index[tokens[1]]))
    return Graph.from_edges(len(order), edges, labels=order)


def read_edge_list(path: Union[str, Path]) -> Graph:
    file_path = Path(path)
    if not file_path.is_file():
        raise InputValidationError(f"missing graph file: {file_path}")
    graph = parse_edge_list(file_path.read_text())
    logger.info("Loaded graph %s: n=%d, m=%d", file_path, graph.n, len(graph.edges()))
    return graph


def load_graph(source: str) -> Graph:
    """Generator spec or edge-list path."""
    if is_generator_spec(source):
        return generate(source)
    return read_edge_list(source)


def _is_int(token: str) -> bool:
    try:
        int(token)
    except ValueError:
        return False
    return True
