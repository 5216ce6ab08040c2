"""
Strong spatial mixing measurements and the checks built on them.

``ssm_check`` measures, for each distance d, the largest relative change of
a single-site conditional marginal when the spins on far vertices are
changed, and fits an exponential decay. ``ssm_factorization_constant``
checks the weak-correlation premise on the marginal of S and the far part
of U. ``ball_chain_check`` audits the cluster-ball factorisation of a
low-diameter partition.
"""

import itertools
import math
from dataclasses import dataclass
from typing import Any, Dict, Iterable, List, Optional, Tuple

import networkx as nx  # type: ignore
import numpy as np  # type: ignore
from sklearn.linear_model import LinearRegression  # type: ignore

from spinfactor.config import (
    BALL_CHAIN_MULTIPLIER,
    DEFAULT_BOUND_AUDIT_FUNCTIONS,
    DEFAULT_PINNING_BUDGET,
    DEFAULT_SSM_RADIUS_CAP,
    PINNING_EXHAUSTIVE_CAP,
    PINNING_SAMPLE_SIZE,
    SSM_GAMMA_MIN,
    ZERO_TOLERANCE,
)
from spinfactor.exceptions import InputValidationError
from spinfactor.models.graph import Graph, VertexSet, ball, induced_ball
from spinfactor.models.spin_system import SpinSystem
from spinfactor.services.decomposition import ClusterPartition
from spinfactor.services.exact_engine import (
    VARIANCE,
    GibbsTable,
    enumerate_gibbs,
    expected_block_functional,
    functional,
)
from spinfactor.services.factorisation_bounds import TwoBlockView, weak_correlation_constant
from spinfactor.utils.data_processor import random_test_functions
from spinfactor.utils.logging_config import get_logger
from spinfactor.utils.parallel import ordered_map

logger = get_logger("spatial_mixing")


@dataclass(frozen=True)
class SSMEstimate:
    samples: Tuple[Tuple[int, float], ...]
    fitted_C: Optional[float]
    fitted_delta: Optional[float]
    holds: bool
    degenerate: bool = False
    vacuous: bool = False
    pinnings_examined: int = 0
    sampled: bool = False

    @property
    def saturated_distances(self) -> List[int]:
        return [d for d, dev in self.samples if math.isinf(dev)]

    def envelope(self, distance: int) -> Optional[float]:
        if self.fitted_C is None or self.fitted_delta is None:
            return None
        return self.fitted_C * (1.0 - self.fitted_delta) ** distance

    def to_dict(self) -> Dict[str, Any]:
        return {
            "samples": [[d, dev] for d, dev in self.samples],
            "fitted_C": self.fitted_C,
            "fitted_delta": self.fitted_delta,
            "holds": self.holds,
            "degenerate": self.degenerate,
            "vacuous": self.vacuous,
            "pinnings_examined": self.pinnings_examined,
            "sampled": self.sampled,
        }


def _pinning_targets(
    t: GibbsTable, budget: int, rng: np.random.Generator
) -> Tuple[List[Tuple[VertexSet, int]], bool]:
    """(pinned set, group index) pairs over all pinnings leaving >= 2 free vertices."""
    subsets: List[VertexSet] = []
    counts: List[int] = []
    for size in range(max(t.n - 1, 0)):
        for subset in itertools.combinations(t.free_vertices, size):
            subsets.append(subset)
            counts.append(t.pinning_count(subset))
    total = int(sum(counts))
    offsets = np.cumsum([0] + counts)
    if total <= budget:
        picks = np.arange(total)
        sampled = False
    else:
        picks = np.sort(rng.choice(total, size=budget, replace=False))
        sampled = True
    targets = []
    for flat in picks:
        which = int(np.searchsorted(offsets, flat, side="right") - 1)
        targets.append((subsets[which], int(flat - offsets[which])))
    return targets, sampled


def _deviations(
    conditional: GibbsTable, distances: Dict[int, Dict[int, float]], radius_cap: int
) -> Dict[int, float]:
    """Largest max/min - 1 of mu(c | tau) over tau on far vertices, per distance."""
    out: Dict[int, float] = {}
    free = conditional.free_vertices
    for v in free:
        site = conditional.grouping((v,))
        for d in range(1, radius_cap + 1):
            far = tuple(u for u in free if u != v and distances[v].get(u, math.inf) >= d)
            if not far:
                continue
            outer = conditional.grouping(far)
            joint = np.zeros((outer.count, site.count))
            np.add.at(joint, (outer.inverse, site.inverse), conditional.probabilities)
            ratios = joint / outer.mass[:, None]
            low = ratios.min(axis=0)
            high = ratios.max(axis=0)
            if np.any(low <= 0.0):
                deviation = math.inf
            else:
                deviation = float((high / low).max() - 1.0)
            out[d] = max(out.get(d, 0.0), deviation)
    return out


def _fit(points: List[Tuple[int, float]]) -> Tuple[float, float]:
    """Least squares on log deviation; C raised so every point lies under the envelope."""
    x = np.array([[d] for d, _ in points], dtype=float)
    y = np.log([dev for _, dev in points])
    model = LinearRegression().fit(x, y)
    delta = 1.0 - math.exp(float(model.coef_[0]))
    constant = math.exp(float(model.intercept_))
    if delta < 1.0:
        constant = max(constant, max(dev / (1.0 - delta) ** d for d, dev in points))
    return constant, delta


def ssm_check(
    sys: SpinSystem,
    radius_cap: int = DEFAULT_SSM_RADIUS_CAP,
    pinning_budget: int = DEFAULT_PINNING_BUDGET,
    seed: int = 0,
    workers: Optional[int] = 1,
    table: Optional[GibbsTable] = None,
) -> SSMEstimate:
    """
    Measure single-site marginal sensitivity to far pinnings and fit
    deviation <= C (1 - delta)^d. Saturated (infinite) deviations are kept
    in the samples but excluded from the fit.
    """
    if radius_cap < 1 or pinning_budget < 1:
        raise InputValidationError("radius_cap and pinning_budget must be >= 1")
    t = table if table is not None else enumerate_gibbs(sys)
    distances = {v: dict(d) for v, d in nx.all_pairs_shortest_path_length(sys.graph.nx_graph)}
    targets, sampled = _pinning_targets(t, pinning_budget, np.random.default_rng(seed))
    if sampled:
        logger.warning("SSM check sampled %d pinnings", len(targets))

    def measure(target: Tuple[VertexSet, int]) -> Dict[int, float]:
        subset, group = target
        _, conditional = t.conditional_on_group(subset, group)
        return _deviations(conditional, distances, radius_cap)

    per_distance: Dict[int, float] = {}
    for found in ordered_map(measure, targets, workers):
        for d, dev in found.items():
            per_distance[d] = max(per_distance.get(d, 0.0), dev)
    samples = tuple(sorted(per_distance.items()))

    fit_points = [(d, dev) for d, dev in samples if 0.0 < dev < math.inf]
    if all(dev <= ZERO_TOLERANCE for _, dev in samples):
        logger.info("SSM holds vacuously: all deviations are zero")
        return SSMEstimate(samples, 0.0, 1.0, True, vacuous=True,
                           pinnings_examined=len(targets), sampled=sampled)
    if len(fit_points) < 2:
        logger.warning("SSM fit degenerate: %d usable distances", len(fit_points))
        return SSMEstimate(samples, None, None, False, degenerate=True,
                           pinnings_examined=len(targets), sampled=sampled)

    constant, delta = _fit(fit_points)
    values = [dev for _, dev in samples]
    monotone = all(later <= earlier * (1.0 + 1e-9) + ZERO_TOLERANCE
                   for earlier, later in zip(values, values[1:]))
    holds = monotone and delta > 0.0
    logger.info("SSM fit: C=%.4g, delta=%.4g, holds=%s", constant, delta, holds)
    return SSMEstimate(samples, constant, delta, holds,
                       pinnings_examined=len(targets), sampled=sampled)


@dataclass(frozen=True)
class SSMFactorization:
    constant: Optional[float]
    epsilon: float
    target: float
    pinnings_examined: int
    reason: str = ""

    @property
    def applicable(self) -> bool:
        return self.constant is not None

    def to_dict(self) -> Dict[str, Any]:
        return {
            "constant": self.constant,
            "applicable": self.applicable,
            "epsilon": self.epsilon,
            "target": self.target,
            "pinnings_examined": self.pinnings_examined,
            "reason": self.reason,
        }


def ssm_factorization_constant(
    sys: SpinSystem,
    u: Iterable[int],
    s: Iterable[int],
    r: int,
    gamma: float = SSM_GAMMA_MIN,
    table: Optional[GibbsTable] = None,
    seed: int = 0,
) -> SSMFactorization:
    """
    Constant e^(1/gamma) for the split {B_U(S, r), U \\ S} when the marginal
    on S u T, T = U \\ B_U(S, r), has weak correlation eps <= 1/(2 gamma)
    under every pinning of V \\ U.
    """
    if gamma < SSM_GAMMA_MIN:
        raise InputValidationError(f"gamma must be >= {SSM_GAMMA_MIN}")
    if r < 0:
        raise InputValidationError("radius must be >= 0")
    members = sys.graph.vertex_set(u)
    separator = sys.graph.vertex_set(s)
    if not separator or not set(separator) <= set(members):
        raise InputValidationError("S must be a nonempty subset of U")
    target = 1.0 / (2.0 * gamma)
    far = tuple(v for v in members if v not in set(induced_ball(sys.graph, members, separator, r)))
    if not far:
        return SSMFactorization(1.0, 0.0, target, 0, "ball covers U")

    t = table if table is not None else enumerate_gibbs(sys)
    outside = t.complement(members)
    count = t.pinning_count(outside)
    groups = np.arange(count)
    if count > PINNING_EXHAUSTIVE_CAP:
        groups = np.sort(np.random.default_rng(seed).choice(count, PINNING_SAMPLE_SIZE, replace=False))
        logger.warning("SSM factorisation sampled %d of %d pinnings", len(groups), count)
    kept = tuple(sorted(separator + far))
    epsilon = 0.0
    for g in groups:
        _, conditional = t.conditional_on_group(outside, int(g))
        view = TwoBlockView.of(conditional.marginal(kept), separator, far)
        epsilon = max(epsilon, weak_correlation_constant(view).epsilon)
    if epsilon <= target:
        return SSMFactorization(math.exp(1.0 / gamma), epsilon, target, len(groups))
    return SSMFactorization(None, epsilon, target, len(groups), f"epsilon {epsilon:.4g} > {target:.4g}")


@dataclass(frozen=True)
class BallChainCheck:
    kind: str
    multiplier: float
    functions: int
    max_ratio: float

    @property
    def holds(self) -> bool:
        return self.max_ratio <= self.multiplier * (1.0 + 1e-9)

    def to_dict(self) -> Dict[str, Any]:
        return {
            "kind": self.kind,
            "multiplier": self.multiplier,
            "functions": self.functions,
            "max_ratio": self.max_ratio,
            "holds": self.holds,
        }


def ball_chain_check(
    t: GibbsTable,
    g: Graph,
    partition: ClusterPartition,
    functions: int = DEFAULT_BOUND_AUDIT_FUNCTIONS,
    kind: str = VARIANCE,
    seed: int = 0,
) -> BallChainCheck:
    """Largest F f / sum_i E[F_{B(V_i, r)} f] over random f, against the factor 3."""
    balls = [ball(g, cluster, partition.radius) for cluster in partition.clusters]
    rng = np.random.default_rng(seed)
    worst = 0.0
    for f in random_test_functions(t.size, functions, kind, rng):
        denominator = math.fsum(expected_block_functional(t, b, f, kind) for b in balls)
        numerator = functional(t, f, kind)
        if denominator > ZERO_TOLERANCE:
            worst = max(worst, numerator / denominator)
    return BallChainCheck(kind, BALL_CHAIN_MULTIPLIER, functions, worst)
