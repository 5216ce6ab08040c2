"""
Exact enumeration engine.

Builds Gibbs tables over feasible configurations and evaluates variance and
entropy functionals, their block (conditional) versions, heat-bath
transition matrices, spectral gaps and the gap/log-Sobolev comparison
constants. Every conditional quantity is computed by grouping table rows on
the values of the conditioning vertices.
"""

import math
from dataclasses import dataclass, field
from typing import Dict, Iterable, Iterator, List, Optional, Sequence, Tuple

import numpy as np  # type: ignore
import scipy.linalg  # type: ignore
from scipy import sparse  # type: ignore
from scipy.sparse.csgraph import connected_components as sparse_components  # type: ignore
from scipy.special import xlogy  # type: ignore

from spinfactor.config import DENSE_EIGEN_CAP, ENUMERATION_CAP, ZERO_TOLERANCE
from spinfactor.exceptions import (
    ComputationError,
    DomainError,
    InputValidationError,
    ResourceLimitError,
)
from spinfactor.models.graph import Graph, VertexSet
from spinfactor.models.spin_system import Pinning, SpinSystem, iter_feasible_states
from spinfactor.utils.logging_config import get_logger

logger = get_logger("exact_engine")

TestFunction = np.ndarray

VARIANCE = "var"
ENTROPY = "ent"
KINDS = (VARIANCE, ENTROPY)


@dataclass(frozen=True)
class RowGrouping:
    """Rows of a table grouped by their values on a vertex subset."""

    inverse: np.ndarray
    keys: np.ndarray
    mass: np.ndarray

    @property
    def count(self) -> int:
        return len(self.mass)


@dataclass(frozen=True, eq=False)
class GibbsTable:
    """
    Exact distribution over the feasible configurations of a (sub)system.

    Column j of ``configurations`` holds the spin label of ``free_vertices[j]``.
    """

    configurations: np.ndarray
    probabilities: np.ndarray
    free_vertices: VertexSet
    partition_function: float = 1.0
    _groupings: Dict[VertexSet, RowGrouping] = field(
        default_factory=dict, repr=False, compare=False
    )

    def __post_init__(self) -> None:
        if self.configurations.shape != (len(self.probabilities), len(self.free_vertices)):
            raise InputValidationError("configuration array does not match probabilities")
        if len(self.probabilities) == 0:
            raise DomainError("Gibbs table has no feasible configuration")

    @property
    def n(self) -> int:
        return len(self.free_vertices)

    @property
    def size(self) -> int:
        return len(self.probabilities)

    @property
    def pi_min(self) -> float:
        return float(self.probabilities.min())

    def columns(self, vertices: Iterable[int]) -> List[int]:
        position = {v: j for j, v in enumerate(self.free_vertices)}
        try:
            return [position[v] for v in vertices]
        except KeyError as exc:
            raise InputValidationError(f"vertex {exc.args[0]} is not free in this table") from exc

    def complement(self, vertices: Iterable[int]) -> VertexSet:
        chosen = set(vertices)
        self.columns(chosen)
        return tuple(v for v in self.free_vertices if v not in chosen)

    def grouping(self, vertices: Iterable[int]) -> RowGrouping:
        """Group rows by their spins on ``vertices`` (memoized per vertex set)."""
        key = tuple(sorted(set(vertices)))
        cached = self._groupings.get(key)
        if cached is not None:
            return cached
        cols = self.columns(key)
        if not cols:
            inverse = np.zeros(self.size, dtype=np.int64)
            keys = np.zeros((1, 0), dtype=np.int64)
        else:
            keys, inverse = np.unique(
                self.configurations[:, cols], axis=0, return_inverse=True
            )
            inverse = np.asarray(inverse).reshape(-1)
        mass = np.bincount(inverse, weights=self.probabilities, minlength=len(keys))
        grouping = RowGrouping(inverse=inverse, keys=keys, mass=mass)
        self._groupings[key] = grouping
        return grouping

    def marginal(self, vertices: Iterable[int]) -> "GibbsTable":
        """Marginal table on a subset of the free vertices."""
        key = tuple(sorted(set(vertices)))
        grouping = self.grouping(key)
        return GibbsTable(
            configurations=grouping.keys.astype(np.int64),
            probabilities=grouping.mass,
            free_vertices=key,
            partition_function=self.partition_function,
        )

    def condition(self, pin: Pinning) -> "GibbsTable":
        """Conditional table given a pinning of some free vertices."""
        if len(pin) == 0:
            return self
        cols = self.columns(pin.vertices)
        values = np.array([c for _, c in pin.assignments], dtype=np.int64)
        mask = np.all(self.configurations[:, cols] == values, axis=1)
        if not mask.any():
            raise DomainError(f"pinning {pin.as_dict()} is infeasible")
        return self._restrict(mask, pin.vertices)

    def pinnings(self, vertices: Iterable[int]) -> Iterator[Tuple[Pinning, "GibbsTable"]]:
        """Every feasible pinning of ``vertices`` with its conditional table."""
        key = tuple(sorted(set(vertices)))
        grouping = self.grouping(key)
        for g in range(grouping.count):
            pin = Pinning(tuple(zip(key, (int(c) for c in grouping.keys[g]))))
            yield pin, self._restrict(grouping.inverse == g, key)

    def pinning_count(self, vertices: Iterable[int]) -> int:
        return self.grouping(vertices).count

    def conditional_on_group(self, vertices: Iterable[int], group: int) -> Tuple[Pinning, "GibbsTable"]:
        key = tuple(sorted(set(vertices)))
        grouping = self.grouping(key)
        pin = Pinning(tuple(zip(key, (int(c) for c in grouping.keys[group]))))
        return pin, self._restrict(grouping.inverse == group, key)

    def _restrict(self, mask: np.ndarray, pinned: Sequence[int]) -> "GibbsTable":
        keep_vertices = self.complement(pinned)
        cols = self.columns(keep_vertices)
        probs = self.probabilities[mask]
        mass = math.fsum(probs)
        return GibbsTable(
            configurations=self.configurations[mask][:, cols],
            probabilities=probs / mass,
            free_vertices=keep_vertices,
            partition_function=self.partition_function * mass,
        )

    def indicator(self, vertex: int, label: int) -> TestFunction:
        (col,) = self.columns([vertex])
        return (self.configurations[:, col] == label).astype(float)


def enumerate_gibbs(sys: SpinSystem, cap: int = ENUMERATION_CAP) -> GibbsTable:
    """Exact Gibbs table of a spin system; Z is stored on the table."""
    states, weights = iter_feasible_states(sys, cap=cap)
    z = math.fsum(weights)
    if len(weights) == 0 or z <= 0:
        raise DomainError("partition function is zero: no feasible configuration")
    if sys.n:
        labels = np.column_stack(
            [sys.domain_arrays[v][states[:, v]] for v in range(sys.n)]
        ).astype(np.int64)
    else:
        labels = np.zeros((1, 0), dtype=np.int64)
    logger.debug("Enumerated %d feasible of %d raw states", len(weights), sys.raw_state_count)
    return GibbsTable(
        configurations=labels,
        probabilities=weights / z,
        free_vertices=tuple(range(sys.n)),
        partition_function=z,
    )


# Functionals


def _check_function(t: GibbsTable, f: TestFunction) -> np.ndarray:
    values = np.asarray(f, dtype=float)
    if values.shape != (t.size,):
        raise InputValidationError(
            f"test function has shape {values.shape}, table has {t.size} configurations"
        )
    return values


def _check_nonnegative(values: np.ndarray) -> None:
    if np.any(values < 0):
        raise InputValidationError("entropy requires a nonnegative function")


def expectation(t: GibbsTable, f: TestFunction) -> float:
    values = _check_function(t, f)
    return math.fsum(t.probabilities * values)


def variance(t: GibbsTable, f: TestFunction) -> float:
    values = _check_function(t, f)
    mean = math.fsum(t.probabilities * values)
    return max(0.0, math.fsum(t.probabilities * (values - mean) ** 2))


def entropy(t: GibbsTable, f: TestFunction) -> float:
    """E[f log f] - E f log E f with 0 log 0 = 0."""
    values = _check_function(t, f)
    _check_nonnegative(values)
    mean = math.fsum(t.probabilities * values)
    return max(0.0, math.fsum(t.probabilities * xlogy(values, values)) - float(xlogy(mean, mean)))


def functional(t: GibbsTable, f: TestFunction, kind: str) -> float:
    if kind == VARIANCE:
        return variance(t, f)
    if kind == ENTROPY:
        return entropy(t, f)
    raise InputValidationError(f"unknown functional kind {kind!r}")


def block_expectation(t: GibbsTable, b: Iterable[int], f: TestFunction) -> TestFunction:
    """E_B f as a function on configurations: average over B given the rest."""
    values = _check_function(t, f)
    grouping = t.grouping(t.complement(b))
    sums = np.bincount(grouping.inverse, weights=t.probabilities * values, minlength=grouping.count)
    means = sums / grouping.mass
    return means[grouping.inverse]


def expected_block_functional(
    t: GibbsTable, b: Iterable[int], f: TestFunction, kind: str
) -> float:
    """E[Var_B f] or E[Ent_B f], averaging over pinnings of the complement of B."""
    values = _check_function(t, f)
    block = tuple(b)
    t.columns(block)
    if not block:
        return 0.0
    conditional_mean = block_expectation(t, block, values)
    if kind == VARIANCE:
        return max(0.0, math.fsum(t.probabilities * (values - conditional_mean) ** 2))
    if kind == ENTROPY:
        _check_nonnegative(values)
        total = math.fsum(t.probabilities * (xlogy(values, values) - xlogy(conditional_mean, conditional_mean)))
        return max(0.0, total)
    raise InputValidationError(f"unknown functional kind {kind!r}")


def site_functional_sum(t: GibbsTable, f: TestFunction, kind: str) -> float:
    """Sum over free vertices v of E[Var_v f] (or E[Ent_v f])."""
    return math.fsum(expected_block_functional(t, (v,), f, kind) for v in t.free_vertices)


@dataclass(frozen=True)
class IdentityResidual:
    variance: float
    entropy: Optional[float]


def decomposition_identity_check(
    t: GibbsTable, a: Iterable[int], b: Iterable[int], f: TestFunction
) -> IdentityResidual:
    """
    Residual of E[F_A f] = E[F_B f] + E[F_A(E_B f)] for F = Var and F = Ent.

    The entropy residual is None when f takes negative values.
    """
    outer = tuple(a)
    inner = tuple(b)
    if not set(inner) <= set(outer):
        raise InputValidationError("decomposition identity requires B to be a subset of A")
    values = _check_function(t, f)
    projected = block_expectation(t, inner, values) if inner else values

    def residual(kind: str) -> float:
        lhs = expected_block_functional(t, outer, values, kind)
        rhs = expected_block_functional(t, inner, values, kind) + expected_block_functional(
            t, outer, projected, kind
        )
        return lhs - rhs

    ent = residual(ENTROPY) if np.all(values >= 0) else None
    return IdentityResidual(variance=residual(VARIANCE), entropy=ent)


def product_subadditivity_check(
    t: GibbsTable,
    blocks: Sequence[Iterable[int]],
    f: TestFunction,
    kind: str = ENTROPY,
    graph: Optional[Graph] = None,
) -> float:
    """
    Slack of E[F_B f] <= sum_i E[F_{B_i} f] for pairwise non-adjacent,
    disjoint blocks B_i with union B. Nonnegative when the premise holds.
    """
    parts = [tuple(block) for block in blocks]
    seen: set = set()
    for part in parts:
        if seen & set(part):
            raise InputValidationError("blocks must be pairwise disjoint")
        seen |= set(part)
    if graph is not None:
        for i, first in enumerate(parts):
            for second in parts[i + 1:]:
                if any(graph.has_edge(u, v) for u in first for v in second):
                    raise InputValidationError("blocks must be pairwise non-adjacent")
    union = tuple(sorted(seen))
    lhs = expected_block_functional(t, union, f, kind)
    rhs = math.fsum(expected_block_functional(t, part, f, kind) for part in parts)
    return rhs - lhs


def projection_inequality_check(
    t: GibbsTable,
    a: Iterable[int],
    b: Iterable[int],
    f: TestFunction,
    kind: str = ENTROPY,
    graph: Optional[Graph] = None,
) -> float:
    """
    Slack of E[F_A(E_B f)] <= E[F_A(E_{A & B} f)] when no edge joins A and B \\ A.
    """
    first = tuple(a)
    second = tuple(b)
    if graph is not None:
        outside = set(second) - set(first)
        if any(graph.has_edge(u, v) for u in first for v in outside):
            raise InputValidationError("projection inequality needs no edges between A and B \\ A")
    values = _check_function(t, f)
    overlap = tuple(v for v in second if v in set(first))
    via_b = block_expectation(t, second, values) if second else values
    via_overlap = block_expectation(t, overlap, values) if overlap else values
    lhs = expected_block_functional(t, first, via_b, kind)
    rhs = expected_block_functional(t, first, via_overlap, kind)
    return rhs - lhs


# Heat-bath chains


@dataclass(frozen=True)
class TransitionMatrix:
    """Sparse heat-bath transition matrix with its communicating-class structure."""

    matrix: "sparse.csr_matrix"
    table: GibbsTable
    block_count: int
    class_labels: np.ndarray

    @property
    def irreducible(self) -> bool:
        return self.block_count == 1

    def witness(self, limit: int = 3) -> Dict[int, List[List[int]]]:
        """A few configurations from each communicating class."""
        out: Dict[int, List[List[int]]] = {}
        for label in range(self.block_count):
            rows = np.flatnonzero(self.class_labels == label)[:limit]
            out[label] = [self.table.configurations[i].tolist() for i in rows]
        return out

    def dense(self) -> np.ndarray:
        if self.table.size > DENSE_EIGEN_CAP:
            raise ResourceLimitError(
                f"chain has {self.table.size} states", "dense_eigen_cap", DENSE_EIGEN_CAP
            )
        return self.matrix.toarray()


def heat_bath_matrix(t: GibbsTable, blocks: Sequence[Iterable[int]]) -> TransitionMatrix:
    """
    Block heat-bath chain: pick a block uniformly, resample it from the
    conditional distribution given everything else.
    """
    block_list = [tuple(block) for block in blocks]
    if not block_list:
        raise InputValidationError("heat-bath chain needs at least one block")
    size = t.size
    rows: List[np.ndarray] = []
    cols: List[np.ndarray] = []
    vals: List[np.ndarray] = []
    for block in block_list:
        grouping = t.grouping(t.complement(block))
        order = np.argsort(grouping.inverse, kind="stable")
        counts = np.bincount(grouping.inverse, minlength=grouping.count)
        starts = np.concatenate([[0], np.cumsum(counts)[:-1]])
        rank = np.arange(size) - starts[grouping.inverse[order]]
        members = np.full((grouping.count, int(counts.max())), -1, dtype=np.int64)
        members[grouping.inverse[order], rank] = order
        partners = members[grouping.inverse]
        valid = partners >= 0
        source = np.repeat(np.arange(size), partners.shape[1]).reshape(partners.shape)
        target = partners[valid]
        rows.append(source[valid])
        cols.append(target)
        vals.append(
            t.probabilities[target] / grouping.mass[grouping.inverse[source[valid]]] / len(block_list)
        )
    matrix = sparse.coo_matrix(
        (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))), shape=(size, size)
    ).tocsr()
    matrix.sum_duplicates()
    count, labels = sparse_components(matrix, directed=True, connection="strong")
    if count > 1:
        logger.warning("Heat-bath chain is not irreducible: %d communicating classes", count)
    return TransitionMatrix(matrix=matrix, table=t, block_count=int(count), class_labels=labels)


def glauber_matrix(t: GibbsTable) -> TransitionMatrix:
    """Single-site heat-bath (Glauber) transition matrix of the table."""
    if t.n == 0:
        matrix = sparse.csr_matrix(np.ones((1, 1)))
        return TransitionMatrix(matrix=matrix, table=t, block_count=1, class_labels=np.zeros(1, dtype=np.int64))
    return heat_bath_matrix(t, [(v,) for v in t.free_vertices])


def _symmetrized(chain: TransitionMatrix) -> np.ndarray:
    p = chain.dense()
    root = np.sqrt(chain.table.probabilities)
    sym = root[:, None] * p / root[None, :]
    return (sym + sym.T) / 2.0


def spectral_gap(chain: TransitionMatrix) -> float:
    """1 - second largest eigenvalue of D^{1/2} P D^{-1/2}."""
    if chain.table.size == 1:
        return 1.0
    if not chain.irreducible:
        return 0.0
    try:
        eigenvalues = scipy.linalg.eigh(_symmetrized(chain), eigvals_only=True)
    except (np.linalg.LinAlgError, ValueError) as exc:
        raise ComputationError(f"eigensolver failed: {exc}") from exc
    second = float(np.sort(eigenvalues)[-2])
    return max(0.0, 1.0 - second)


@dataclass(frozen=True)
class LogSobolevBound:
    basic: float
    sharper: Optional[float]
    pi_min: float

    @property
    def bound(self) -> float:
        return max(self.basic, self.sharper if self.sharper is not None else 0.0)


def log_sobolev_lower(gap: float, t: GibbsTable) -> LogSobolevBound:
    """
    Lower bounds on the log-Sobolev constant from the spectral gap:
    gap / (2 + log(1/pi_min)) and, when pi_min < 1/2,
    (1 - 2 pi_min) / log(1/pi_min - 1) * gap.
    """
    pi_min = t.pi_min
    basic = gap / (2.0 + math.log(1.0 / pi_min))
    sharper: Optional[float] = None
    if pi_min < 0.5:
        sharper = (1.0 - 2.0 * pi_min) / math.log(1.0 / pi_min - 1.0) * gap
    elif math.isclose(pi_min, 0.5):
        sharper = gap / 2.0
    return LogSobolevBound(basic=basic, sharper=sharper, pi_min=pi_min)


@dataclass(frozen=True)
class InequalityCheck:
    lhs: float
    rhs: float

    @property
    def slack(self) -> float:
        return self.rhs - self.lhs

    @property
    def relative_slack(self) -> float:
        scale = max(abs(self.lhs), abs(self.rhs), ZERO_TOLERANCE)
        return self.slack / scale if math.isfinite(self.slack) else math.inf


@dataclass(frozen=True)
class GapTensorizationCheck:
    variance: InequalityCheck
    entropy: Optional[InequalityCheck]


def _scaled(constant: float, total: float) -> float:
    if total == 0.0:
        return 0.0
    return constant * total


def at_from_gap(
    t: GibbsTable, f: TestFunction, gap: float, lsi: float
) -> GapTensorizationCheck:
    """
    Both sides of Var f <= (1/(gap n)) sum_i E[Var_i f] and
    Ent f <= (1/(lsi n)) sum_i E[Ent_i f].
    """
    values = _check_function(t, f)
    n = max(t.n, 1)
    var_constant = math.inf if gap <= 0 else 1.0 / (gap * n)
    var_check = InequalityCheck(
        lhs=variance(t, values),
        rhs=_scaled(var_constant, site_functional_sum(t, values, VARIANCE)),
    )
    ent_check = None
    if np.all(values >= 0):
        ent_constant = math.inf if lsi <= 0 else 1.0 / (lsi * n)
        ent_check = InequalityCheck(
            lhs=entropy(t, values),
            rhs=_scaled(ent_constant, site_functional_sum(t, values, ENTROPY)),
        )
    return GapTensorizationCheck(variance=var_check, entropy=ent_check)


# Optimal variance constants


def optimal_block_variance_constant(t: GibbsTable, blocks: Sequence[Iterable[int]]) -> float:
    """
    Least C with Var f <= C * sum_B E[Var_B f], via the generalised
    eigenproblem of the variance form against the block Dirichlet form on
    the complement of constants. math.inf when the blocks cannot mix.
    """
    size = t.size
    if size == 1:
        return 1.0
    if size > DENSE_EIGEN_CAP:
        raise ResourceLimitError(f"table has {size} states", "dense_eigen_cap", DENSE_EIGEN_CAP)
    p = t.probabilities
    d = np.diag(p)
    var_form = d - np.outer(p, p)
    dirichlet = np.zeros((size, size))
    for block in blocks:
        chain = heat_bath_matrix(t, [tuple(block)])
        dirichlet += d - d @ chain.matrix.toarray()
    dirichlet = (dirichlet + dirichlet.T) / 2.0
    basis = scipy.linalg.null_space(np.ones((1, size)))
    a_hat = basis.T @ var_form @ basis
    b_hat = basis.T @ dirichlet @ basis
    try:
        b_eigs = scipy.linalg.eigh(b_hat, eigvals_only=True)
        if b_eigs.min() <= 1e-12 * max(1.0, float(np.abs(b_eigs).max())):
            return math.inf
        eigenvalues = scipy.linalg.eigh(a_hat, b_hat, eigvals_only=True)
    except (np.linalg.LinAlgError, ValueError) as exc:
        raise ComputationError(f"generalised eigensolver failed: {exc}") from exc
    return float(eigenvalues.max())


def block_dynamics_constant(t: GibbsTable, blocks: Sequence[Iterable[int]]) -> float:
    """The same optimal constant from the block heat-bath gap: 1 / (|blocks| gap)."""
    chain = heat_bath_matrix(t, blocks)
    gap = spectral_gap(chain)
    return math.inf if gap <= 0 else 1.0 / (len(blocks) * gap)


def optimal_at_variance_constant(t: GibbsTable) -> float:
    """Least variance AT multiplier: 1 / (n * Glauber gap)."""
    if t.n == 0:
        return 1.0
    gap = spectral_gap(glauber_matrix(t))
    return math.inf if gap <= 0 else 1.0 / (t.n * gap)


def block_factorization_check(
    t: GibbsTable, blocks: Sequence[Iterable[int]], f: TestFunction, constant: float, kind: str
) -> InequalityCheck:
    """Both sides of F f <= C * sum_B E[F_B f]."""
    values = _check_function(t, f)
    total = math.fsum(expected_block_functional(t, tuple(b), values, kind) for b in blocks)
    return InequalityCheck(lhs=functional(t, values, kind), rhs=_scaled(constant, total))


def tensorization_check(
    t: GibbsTable, f: TestFunction, constant: float, kind: str
) -> InequalityCheck:
    """Both sides of F f <= C * sum_v E[F_v f]."""
    return block_factorization_check(t, [(v,) for v in t.free_vertices], f, constant, kind)
