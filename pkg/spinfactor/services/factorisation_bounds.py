"""
Factorisation-constant calculators.

Two-block constants from weak and strong correlation, the crude
multivariable constant, pairwise influence matrices and the spectral
independence gap bound, the marginal-equivalence transfer and the Pinsker
step audit. Inapplicable premises come back as result values so callers
can fall back to another calculator.
"""

import itertools
import math
from dataclasses import dataclass
from typing import Iterable, List, Optional, Sequence, Tuple

import numpy as np  # type: ignore
from scipy.spatial.distance import pdist  # type: ignore
from scipy.special import rel_entr  # type: ignore

from spinfactor.config import ENTROPY_FUNCTION_RANGE, EQUIVALENCE_TOLERANCE
from spinfactor.exceptions import InputValidationError
from spinfactor.models.graph import VertexSet
from spinfactor.models.spin_system import Pinning
from spinfactor.services.exact_engine import (
    ENTROPY,
    GibbsTable,
    TestFunction,
    entropy,
    expected_block_functional,
    optimal_block_variance_constant,
)
from spinfactor.utils.logging_config import get_logger
from spinfactor.utils.parallel import ordered_map

logger = get_logger("factorisation_bounds")


def max_pairwise_tv(rows: np.ndarray) -> float:
    """Largest total-variation distance between any two rows."""
    if rows.shape[0] < 2:
        return 0.0
    return float(pdist(rows, metric="cityblock").max()) / 2.0


def total_variation(p: np.ndarray, q: np.ndarray) -> float:
    return 0.5 * float(np.abs(np.asarray(p) - np.asarray(q)).sum())


def kl_divergence(p: np.ndarray, q: np.ndarray) -> float:
    """KL(p || q); infinite when p puts mass where q does not."""
    return float(rel_entr(np.asarray(p, dtype=float), np.asarray(q, dtype=float)).sum())


@dataclass(frozen=True, eq=False)
class TwoBlockView:
    """A table split into two blocks X, Y that partition its free vertices."""

    table: GibbsTable
    block_x: VertexSet
    block_y: VertexSet

    def __post_init__(self) -> None:
        x, y = set(self.block_x), set(self.block_y)
        if not x or not y:
            raise InputValidationError("both blocks must be nonempty")
        if x & y or x | y != set(self.table.free_vertices):
            raise InputValidationError("blocks must partition the free vertices")

    @classmethod
    def of(cls, table: GibbsTable, block_x: Iterable[int], block_y: Iterable[int]) -> "TwoBlockView":
        return cls(table, tuple(sorted(block_x)), tuple(sorted(block_y)))

    @property
    def joint(self) -> np.ndarray:
        """pi(x, y) indexed by the X and Y groupings."""
        gx = self.table.grouping(self.block_x)
        gy = self.table.grouping(self.block_y)
        out = np.zeros((gx.count, gy.count))
        np.add.at(out, (gx.inverse, gy.inverse), self.table.probabilities)
        return out

    def conditionals(self) -> Tuple[np.ndarray, np.ndarray]:
        """Rows pi_X^y (one per y) and rows pi_Y^x (one per x)."""
        joint = self.joint
        x_given_y = (joint / joint.sum(axis=0)[None, :]).T
        y_given_x = joint / joint.sum(axis=1)[:, None]
        return x_given_y, y_given_x


@dataclass(frozen=True)
class WeakCorrelationResult:
    epsilon: float
    constant: Optional[float]
    reason: str = ""

    @property
    def applicable(self) -> bool:
        return self.constant is not None


def weak_correlation_constant(view: TwoBlockView) -> WeakCorrelationResult:
    """
    eps = max |pi_X^y(x) / pi_X(x) - 1|; constant 1 + eps / (1 - 2 eps) when eps < 1/2.
    """
    joint = view.joint
    pi_x = joint.sum(axis=1)
    pi_y = joint.sum(axis=0)
    ratios = joint / np.outer(pi_x, pi_y)
    epsilon = float(np.abs(ratios - 1.0).max())
    if epsilon >= 0.5:
        return WeakCorrelationResult(epsilon, None, "epsilon >= 1/2")
    return WeakCorrelationResult(epsilon, 1.0 + epsilon / (1.0 - 2.0 * epsilon))


@dataclass(frozen=True)
class StrongCorrelationResult:
    eps_x: float
    eps_y: float
    pi_min: float
    var_constant: Optional[float]
    ent_constant: Optional[float]
    reason: str = ""

    @property
    def applicable(self) -> bool:
        return self.var_constant is not None

    def constant(self, kind: str) -> Optional[float]:
        return self.ent_constant if kind == ENTROPY else self.var_constant


def strong_correlation_constant(view: TwoBlockView) -> StrongCorrelationResult:
    """
    eps_X = 1 - max_{y,y'} TV(pi_X^y, pi_X^y'), symmetrically eps_Y;
    constants 2 / (eps_X + eps_Y) and (4 + 2 log(1/pi_min)) / (eps_X + eps_Y).
    """
    x_given_y, y_given_x = view.conditionals()
    eps_x = 1.0 - max_pairwise_tv(x_given_y)
    eps_y = 1.0 - max_pairwise_tv(y_given_x)
    pi_min = view.table.pi_min
    if eps_x * eps_y <= 0.0:
        return StrongCorrelationResult(eps_x, eps_y, pi_min, None, None, "eps_X * eps_Y = 0")
    total = eps_x + eps_y
    return StrongCorrelationResult(
        eps_x=eps_x,
        eps_y=eps_y,
        pi_min=pi_min,
        var_constant=2.0 / total,
        ent_constant=(4.0 + 2.0 * math.log(1.0 / pi_min)) / total,
    )


@dataclass(frozen=True)
class InfluenceMatrix:
    entries: np.ndarray
    vertices: VertexSet
    pinning: Pinning

    @property
    def spectral_radius(self) -> float:
        if self.entries.size == 0:
            return 0.0
        return float(np.abs(np.linalg.eigvals(self.entries)).max())

    @property
    def max_row_sum(self) -> float:
        if self.entries.size == 0:
            return 0.0
        return float(self.entries.sum(axis=1).max())


def _influence_entries(table: GibbsTable) -> np.ndarray:
    vertices = table.free_vertices
    k = len(vertices)
    groupings = [table.grouping((v,)) for v in vertices]
    out = np.zeros((k, k))
    for i in range(k):
        gi = groupings[i]
        for j in range(k):
            if i == j:
                continue
            gj = groupings[j]
            joint = np.zeros((gi.count, gj.count))
            np.add.at(joint, (gi.inverse, gj.inverse), table.probabilities)
            out[i, j] = max_pairwise_tv(joint / joint.sum(axis=1)[:, None])
    return out


def influence_matrix(t: GibbsTable, pin: Optional[Pinning] = None) -> InfluenceMatrix:
    """Entry (i, j): max over feasible spins x_i, x_i' of TV of the conditional marginals at j."""
    pin = pin or Pinning()
    conditional = t.condition(pin)
    if conditional.n < 2:
        raise InputValidationError("influence matrix needs at least two free vertices")
    return InfluenceMatrix(_influence_entries(conditional), conditional.free_vertices, pin)


@dataclass(frozen=True)
class PinningLevel:
    """Largest influence entry and spectral radius over pinnings of one size."""

    size: int
    max_influence: float
    max_spectral_radius: float
    pinnings_examined: int


def _scan_subset(t: GibbsTable, subset: VertexSet) -> Tuple[float, float, int]:
    best_entry, best_radius, count = 0.0, 0.0, 0
    for _, conditional in t.pinnings(subset):
        if conditional.n < 2:
            continue
        matrix = InfluenceMatrix(_influence_entries(conditional), conditional.free_vertices, Pinning())
        best_entry = max(best_entry, float(matrix.entries.max()))
        best_radius = max(best_radius, matrix.spectral_radius)
        count += 1
    return best_entry, best_radius, count


def pinning_level_scan(t: GibbsTable, workers: Optional[int] = 1) -> List[PinningLevel]:
    """Exhaustive scan over pinnings of every size 0..n-2."""
    n = t.n
    if n < 2:
        raise InputValidationError("pinning scan needs at least two free vertices")
    levels: List[PinningLevel] = []
    for size in range(n - 1):
        subsets = list(itertools.combinations(t.free_vertices, size))
        results = ordered_map(lambda s: _scan_subset(t, s), subsets, workers)
        levels.append(
            PinningLevel(
                size=size,
                max_influence=max(r[0] for r in results),
                max_spectral_radius=max(r[1] for r in results),
                pinnings_examined=sum(r[2] for r in results),
            )
        )
    return levels


@dataclass(frozen=True)
class CrudeResult:
    epsilon: float
    n: int
    pi_min: float
    var_constant: Optional[float]
    ent_constant: Optional[float]
    reason: str = ""

    @property
    def applicable(self) -> bool:
        return self.var_constant is not None

    def constant(self, kind: str) -> Optional[float]:
        return self.ent_constant if kind == ENTROPY else self.var_constant


def crude_constants(epsilon: float, n: int, pi_min: float) -> CrudeResult:
    if epsilon <= 0.0:
        return CrudeResult(epsilon, n, pi_min, None, None, "epsilon = 0")
    scale = epsilon ** (n - 1)
    return CrudeResult(
        epsilon=epsilon,
        n=n,
        pi_min=pi_min,
        var_constant=1.0 / scale,
        ent_constant=(2.0 + math.log(1.0 / pi_min)) / scale,
    )


def crude_multivariable_constant(t: GibbsTable, workers: Optional[int] = 1) -> CrudeResult:
    """
    eps = 1 - max influence over all pinnings of at most n-2 vertices;
    constants 1 / eps^(n-1) and (2 + log(1/pi_min)) / eps^(n-1).
    """
    levels = pinning_level_scan(t, workers)
    epsilon = 1.0 - max(level.max_influence for level in levels)
    return crude_constants(epsilon, t.n, t.pi_min)


@dataclass(frozen=True)
class SpectralIndependenceResult:
    etas: Tuple[float, ...]
    bound: Optional[float]
    reason: str = ""

    @property
    def applicable(self) -> bool:
        return self.bound is not None


def spectral_independence_gap(etas: Sequence[float], n: int) -> SpectralIndependenceResult:
    """(1/n) * prod_{k=0}^{n-2} (1 - eta_k / (n - k - 1)) when every eta_k < n - k - 1."""
    if n < 1:
        raise InputValidationError("spectral independence bound needs n >= 1")
    if len(etas) != max(n - 1, 0):
        raise InputValidationError(f"expected {max(n - 1, 0)} levels, got {len(etas)}")
    product = 1.0
    for k, eta in enumerate(etas):
        slack = n - k - 1
        if eta >= slack:
            return SpectralIndependenceResult(tuple(etas), None, f"eta_{k} = {eta} >= {slack}")
        product *= 1.0 - eta / slack
    return SpectralIndependenceResult(tuple(etas), product / n)


def spectral_independence_profile(t: GibbsTable, workers: Optional[int] = 1) -> List[float]:
    """eta_k for k = 0..n-2 by exhaustive pinning enumeration."""
    if t.n < 2:
        return []
    return [level.max_spectral_radius for level in pinning_level_scan(t, workers)]


@dataclass(frozen=True)
class EntropyTransferAudit:
    marginal_lower: float
    block_lower: float
    lift_residual: float
    samples: int


@dataclass(frozen=True)
class MarginalEquivalenceResult:
    c_marginal: float
    c_block: float
    entropy_audit: Optional[EntropyTransferAudit] = None

    @property
    def residual(self) -> float:
        if math.isinf(self.c_marginal) and math.isinf(self.c_block):
            return 0.0
        return self.c_marginal - self.c_block

    @property
    def equivalent(self) -> bool:
        scale = max(1.0, abs(self.c_block)) if math.isfinite(self.c_block) else 1.0
        return abs(self.residual) <= EQUIVALENCE_TOLERANCE * scale


def _entropy_ratio(t: GibbsTable, f: TestFunction, blocks: Sequence[VertexSet]) -> float:
    denominator = math.fsum(expected_block_functional(t, b, f, ENTROPY) for b in blocks)
    numerator = entropy(t, f)
    if denominator <= 0.0:
        return 0.0 if numerator <= 0.0 else math.inf
    return numerator / denominator


def marginal_equivalence_check(
    t: GibbsTable,
    x: Iterable[int],
    y: Iterable[int],
    z: Iterable[int],
    entropy_samples: int = 0,
    seed: int = 0,
) -> MarginalEquivalenceResult:
    """
    Optimal variance constants of the {X, Y} split of the XY-marginal and of
    the {X u Z, Y u Z} split of the full table; optionally audits the entropy
    side with random positive functions lifted from the marginal.
    """
    bx, by, bz = (tuple(sorted(set(s))) for s in (x, y, z))
    if set(bx) & set(by) or set(bz) & (set(bx) | set(by)):
        raise InputValidationError("X, Y, Z must be disjoint")
    if set(bx) | set(by) | set(bz) != set(t.free_vertices):
        raise InputValidationError("X, Y, Z must cover the free vertices")
    marginal = t.marginal(bx + by)
    c_marginal = optimal_block_variance_constant(marginal, [bx, by])
    block_xz = tuple(sorted(bx + bz))
    block_yz = tuple(sorted(by + bz))
    c_block = optimal_block_variance_constant(t, [block_xz, block_yz])

    audit = None
    if entropy_samples > 0:
        rng = np.random.default_rng(seed)
        low, high = ENTROPY_FUNCTION_RANGE
        lift_index = marginal_row_index(t, marginal)
        marginal_lower = block_lower = lift_residual = 0.0
        for _ in range(entropy_samples):
            g = rng.uniform(low, high, size=marginal.size)
            lifted = g[lift_index]
            ratio_marginal = _entropy_ratio(marginal, g, [bx, by])
            ratio_lifted = _entropy_ratio(t, lifted, [block_xz, block_yz])
            f = rng.uniform(low, high, size=t.size)
            ratio_free = _entropy_ratio(t, f, [block_xz, block_yz])
            marginal_lower = max(marginal_lower, ratio_marginal)
            block_lower = max(block_lower, ratio_lifted, ratio_free)
            lift_residual = max(lift_residual, abs(ratio_marginal - ratio_lifted))
        audit = EntropyTransferAudit(marginal_lower, block_lower, lift_residual, entropy_samples)

    logger.debug("Marginal equivalence: c_marginal=%.6g c_block=%.6g", c_marginal, c_block)
    return MarginalEquivalenceResult(c_marginal, c_block, audit)


def marginal_row_index(t: GibbsTable, marginal: GibbsTable) -> np.ndarray:
    """For each row of t, the row of ``marginal`` it projects to."""
    grouping = t.grouping(marginal.free_vertices)
    # grouping keys are sorted lexicographically, as are the marginal's rows
    return grouping.inverse


@dataclass(frozen=True)
class PinskerAudit:
    tv_x: float
    tv_y: float
    kl_x: float
    kl_y: float

    @property
    def lhs(self) -> float:
        return 4.0 * self.tv_x * self.tv_y

    @property
    def rhs(self) -> float:
        return self.kl_x + self.kl_y

    @property
    def holds(self) -> bool:
        return self.lhs <= self.rhs + 1e-12


def pinsker_step_audit(view: TwoBlockView, f: TestFunction) -> PinskerAudit:
    """Compare 4 TV(nu_X, pi_X) TV(nu_Y, pi_Y) with KL(nu_X||pi_X) + KL(nu_Y||pi_Y) for nu = f pi / E f."""
    values = np.asarray(f, dtype=float)
    if np.any(values < 0) or values.sum() <= 0:
        raise InputValidationError("Pinsker audit needs a nonnegative, nonzero function")
    tilted = view.table.probabilities * values
    tilted = tilted / tilted.sum()
    gx = view.table.grouping(view.block_x)
    gy = view.table.grouping(view.block_y)
    nu_x = np.bincount(gx.inverse, weights=tilted, minlength=gx.count)
    nu_y = np.bincount(gy.inverse, weights=tilted, minlength=gy.count)
    return PinskerAudit(
        tv_x=total_variation(nu_x, gx.mass),
        tv_y=total_variation(nu_y, gy.mass),
        kl_x=kl_divergence(nu_x, gx.mass),
        kl_y=kl_divergence(nu_y, gy.mass),
    )
