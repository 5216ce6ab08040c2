"""
Glauber dynamics: simulation, exact mixing times and coupling estimates.

All randomness flows through numpy Generators on the Philox bit generator,
seeded through SeedSequence and split per trial, so every run is
reproducible from its seed.
"""

import math
from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional, Sequence, Tuple, Union

import networkx as nx  # type: ignore
import numpy as np  # type: ignore
from sklearn.linear_model import LinearRegression  # type: ignore

from spinfactor.config import (
    COUPLING_MIXING_QUANTILE,
    COUPLING_QUANTILES,
    DEFAULT_COUPLING_HORIZON,
    DEFAULT_COUPLING_TRIALS,
    EXACT_MIXING_CAP,
    MIXING_CHUNK_SIZE,
    MIXING_MAX_STEPS,
    MIXING_THRESHOLD,
    RNG_ALGORITHM,
)
from spinfactor.exceptions import DomainError, InputValidationError, ResourceLimitError
from spinfactor.models.spin_system import SpinSystem, iter_feasible_states
from spinfactor.services.exact_engine import GibbsTable, enumerate_gibbs, glauber_matrix
from spinfactor.utils.logging_config import get_logger
from spinfactor.utils.parallel import ordered_map

logger = get_logger("glauber")

EXACT_TV = "exact-tv"
COUPLING = "coupling"
DRAW_BLOCK = 1024


def make_rng(seed: Union[int, np.random.SeedSequence]) -> np.random.Generator:
    sequence = seed if isinstance(seed, np.random.SeedSequence) else np.random.SeedSequence(seed)
    return np.random.Generator(getattr(np.random, RNG_ALGORITHM)(sequence))


@dataclass(frozen=True)
class ChainState:
    """
    A feasible configuration (spin labels by vertex) after ``step`` updates.

    ``rng_state`` is the bit generator position after those updates, so
    stepping the same state twice replays the same draws.
    """

    configuration: Tuple[int, ...]
    step: int = 0
    rng_state: Optional[Dict[str, Any]] = field(default=None, compare=False, repr=False)


def _draw(weights: np.ndarray, u: float) -> int:
    """Inverse-CDF draw from unnormalised weights with a shared uniform u."""
    cumulative = np.cumsum(weights)
    return int(np.searchsorted(cumulative, u * cumulative[-1], side="right"))


class GlauberSampler:
    """
    Single-site heat-bath chain on a spin system.

    Configurations are handled internally as spin indices; the public
    ChainState carries labels.
    """

    def __init__(self, sys: SpinSystem, seed: int = 0) -> None:
        if sys.n == 0:
            raise InputValidationError("Glauber dynamics needs at least one vertex")
        self.sys = sys
        self.seed = seed
        self.neighbours = [np.array(sys.graph.neighbors(v), dtype=np.int64) for v in range(sys.n)]
        self.tables = [[sys.edge_table(u, v) for u in sys.graph.neighbors(v)] for v in range(sys.n)]
        self.fields = [np.asarray(w, dtype=float) for w in sys.vertex_weights]

    # Configurations

    def to_indices(self, labels: Sequence[int]) -> np.ndarray:
        if len(labels) != self.sys.n:
            raise InputValidationError("configuration must assign every vertex")
        return np.array([self.sys.index_of(v, c) for v, c in enumerate(labels)], dtype=np.int64)

    def to_labels(self, spins: np.ndarray) -> Tuple[int, ...]:
        return tuple(int(self.sys.domains[v][i]) for v, i in enumerate(spins))

    def conditional_weights(self, spins: np.ndarray, v: int) -> np.ndarray:
        weights = self.fields[v].copy()
        for u, table in zip(self.neighbours[v], self.tables[v]):
            weights *= table[spins[u]]
        return weights

    def is_feasible(self, spins: np.ndarray) -> bool:
        return self.sys.weight(self.to_labels(spins)) > 0.0

    def greedy_state(self, reverse: bool = False) -> np.ndarray:
        """
        A feasible configuration built vertex by vertex, taking the first (or
        last) spin compatible with the neighbours fixed so far. Falls back to
        enumeration when the greedy pass gets stuck.
        """
        spins = np.full(self.sys.n, -1, dtype=np.int64)
        for v in range(self.sys.n):
            weights = self.fields[v].copy()
            for u, table in zip(self.neighbours[v], self.tables[v]):
                if spins[u] >= 0:
                    weights *= table[spins[u]]
            feasible = np.flatnonzero(weights > 0)
            if feasible.size == 0:
                break
            spins[v] = feasible[-1] if reverse else feasible[0]
        else:
            if self.is_feasible(spins):
                return spins
        states, _ = iter_feasible_states(self.sys)
        if len(states) == 0:
            raise DomainError("system has no feasible configuration")
        return states[-1 if reverse else 0].copy()

    def initial_state(self, configuration: Optional[Sequence[int]] = None) -> ChainState:
        spins = self.greedy_state() if configuration is None else self.to_indices(configuration)
        if not self.is_feasible(spins):
            raise DomainError("initial configuration has zero weight")
        return ChainState(self.to_labels(spins), 0, make_rng(self.seed).bit_generator.state)

    # Dynamics

    def _generator(self, state: ChainState) -> np.random.Generator:
        """A fresh generator positioned where ``state`` left its stream."""
        if state.rng_state is None:
            # no stored position: derive one from (seed, step)
            return make_rng(np.random.SeedSequence([self.seed, state.step]))
        rng = make_rng(self.seed)
        rng.bit_generator.state = state.rng_state
        return rng

    def update(self, spins: np.ndarray, v: int, u: float) -> None:
        """Resample spin v in place from its conditional given the rest."""
        weights = self.conditional_weights(spins, v)
        if weights.sum() <= 0.0:
            raise DomainError(f"vertex {v} has no feasible spin: state is infeasible")
        spins[v] = _draw(weights, u)

    def step(self, state: ChainState) -> ChainState:
        """One update: uniform vertex, heat-bath resample."""
        rng = self._generator(state)
        spins = self.to_indices(state.configuration)
        v = int(rng.integers(self.sys.n))
        self.update(spins, v, float(rng.random()))
        return ChainState(self.to_labels(spins), state.step + 1, rng.bit_generator.state)

    def run(self, state: ChainState, steps: int) -> ChainState:
        rng = self._generator(state)
        spins = self.to_indices(state.configuration)
        done = 0
        while done < steps:
            block = min(DRAW_BLOCK, steps - done)
            sites = rng.integers(self.sys.n, size=block)
            uniforms = rng.random(block)
            for v, u in zip(sites, uniforms):
                self.update(spins, int(v), float(u))
            done += block
        return ChainState(self.to_labels(spins), state.step + steps, rng.bit_generator.state)

    def empirical_distribution(
        self, steps: int, burn_in: int = 0, table: Optional[GibbsTable] = None
    ) -> float:
        """TV between the visit histogram of one long run and the Gibbs table."""
        t = table if table is not None else enumerate_gibbs(self.sys)
        index = {tuple(row): i for i, row in enumerate(t.configurations.tolist())}
        state = self.run(self.initial_state(), burn_in)
        rng = self._generator(state)
        spins = self.to_indices(state.configuration)
        counts = np.zeros(t.size)
        done = 0
        while done < steps:
            block = min(DRAW_BLOCK, steps - done)
            sites = rng.integers(self.sys.n, size=block)
            uniforms = rng.random(block)
            for v, u in zip(sites, uniforms):
                self.update(spins, int(v), float(u))
                counts[index[self.to_labels(spins)]] += 1
            done += block
        return 0.5 * float(np.abs(counts / counts.sum() - t.probabilities).sum())


def step(sys: SpinSystem, state: ChainState) -> ChainState:
    return GlauberSampler(sys).step(state)


# Mixing estimates


@dataclass(frozen=True)
class MixingEstimate:
    method: str
    t_mix: float
    tv_curve: Tuple[Tuple[int, float], ...]
    note: str = ""
    quantiles: Optional[Dict[str, float]] = None
    censored: bool = False
    trials: int = 0
    witness: Optional[Dict[int, List[List[int]]]] = None
    rng_algorithm: str = RNG_ALGORITHM

    def curve_columns(self) -> Tuple[str, str]:
        return ("t", "tv") if self.method == EXACT_TV else ("t", "coalesced_fraction")

    def to_dict(self) -> Dict[str, Any]:
        return {
            "method": self.method,
            "t_mix": self.t_mix,
            "note": self.note,
            "quantiles": self.quantiles,
            "censored": self.censored,
            "trials": self.trials,
            "witness": self.witness,
            "rng_algorithm": self.rng_algorithm,
            "curve_points": len(self.tv_curve),
        }


def _chunk_curve(
    transposed, pi: np.ndarray, starts: np.ndarray, limit: int, threshold: Optional[float]
) -> List[float]:
    """
    Max TV over the given start states at t = 1, 2, ...; stops at the first
    t with max TV <= threshold (when given) or after ``limit`` steps.
    """
    size = len(pi)
    dist = np.zeros((size, len(starts)))
    dist[starts, np.arange(len(starts))] = 1.0
    curve: List[float] = []
    while len(curve) < limit:
        dist = transposed @ dist
        tv = 0.5 * float(np.abs(dist - pi[:, None]).sum(axis=0).max())
        curve.append(tv)
        if threshold is not None and tv <= threshold:
            break
    return curve


def exact_mixing_time(
    sys: SpinSystem,
    cap: int = EXACT_MIXING_CAP,
    threshold: float = MIXING_THRESHOLD,
    max_steps: int = MIXING_MAX_STEPS,
    workers: Optional[int] = 1,
    table: Optional[GibbsTable] = None,
) -> MixingEstimate:
    """
    Least t >= 1 with max over starts of TV(P^t(x, .), mu) <= threshold,
    by evolving chunks of start states against the sparse transition matrix.
    """
    t = table if table is not None else enumerate_gibbs(sys)
    if t.size > cap:
        raise ResourceLimitError(f"{t.size} feasible states", "exact_mixing_cap", cap)
    chain = glauber_matrix(t)
    if not chain.irreducible:
        logger.warning("Exact mixing: chain has %d communicating classes", chain.block_count)
        return MixingEstimate(
            EXACT_TV, math.inf, (), note="chain is not irreducible", witness=chain.witness()
        )
    transposed = chain.matrix.T.tocsr()
    pi = t.probabilities
    chunks = [np.arange(i, min(i + MIXING_CHUNK_SIZE, t.size)) for i in range(0, t.size, MIXING_CHUNK_SIZE)]

    first = ordered_map(lambda s: _chunk_curve(transposed, pi, s, max_steps, threshold), chunks, workers)
    stops = [len(c) if c[-1] <= threshold else math.inf for c in first]
    t_mix = max(stops)
    if math.isinf(t_mix):
        logger.warning("Exact mixing: threshold not reached within %d steps", max_steps)
        horizon = max_steps
    else:
        horizon = int(t_mix)
    if len(chunks) == 1:
        curve = first[0][:horizon]
    else:
        full = ordered_map(lambda s: _chunk_curve(transposed, pi, s, horizon, None), chunks, workers)
        curve = list(np.max(np.array(full), axis=0))
    logger.info("Exact mixing time %s over %d states", t_mix, t.size)
    return MixingEstimate(
        EXACT_TV,
        t_mix if math.isinf(t_mix) else int(t_mix),
        tuple((i + 1, float(v)) for i, v in enumerate(curve)),
        note="worst-case start, exact transition matrix",
    )


def _is_monotone_hardcore(sys: SpinSystem) -> bool:
    return sys.model == "hardcore" and nx.is_bipartite(sys.graph.nx_graph)


def _extreme_states(sys: SpinSystem) -> Tuple[np.ndarray, np.ndarray]:
    """Hardcore extremes for the bipartite order: one side full, the other empty."""
    colouring = nx.bipartite.color(sys.graph.nx_graph)
    side = np.array([colouring[v] for v in range(sys.n)], dtype=np.int64)
    return (side == 0).astype(np.int64), (side == 1).astype(np.int64)


def _coalescence_time(
    sampler: GlauberSampler, first: np.ndarray, second: np.ndarray, horizon: int,
    sequence: np.random.SeedSequence,
) -> float:
    """Steps until two chains driven by the same vertex and uniform agree."""
    rng = make_rng(sequence)
    a, b = first.copy(), second.copy()
    if np.array_equal(a, b):
        return 0.0
    done = 0
    while done < horizon:
        block = min(DRAW_BLOCK, horizon - done)
        sites = rng.integers(sampler.sys.n, size=block)
        uniforms = rng.random(block)
        for offset, (v, u) in enumerate(zip(sites, uniforms)):
            sampler.update(a, int(v), float(u))
            sampler.update(b, int(v), float(u))
            if a[v] == b[v] and np.array_equal(a, b):
                return float(done + offset + 1)
        done += block
    return math.inf


def coupling_mixing_estimate(
    sys: SpinSystem,
    trials: int = DEFAULT_COUPLING_TRIALS,
    horizon: int = DEFAULT_COUPLING_HORIZON,
    seed: int = 0,
    workers: Optional[int] = 1,
) -> MixingEstimate:
    """
    Heuristic mixing time from coupling coalescence: grand coupling from the
    two extremes for hardcore on bipartite graphs (monotone), otherwise two
    greedy starts driven by identical randomness. t_mix is the 75% quantile.
    """
    if trials < 1 or horizon < 1:
        raise InputValidationError("trials and horizon must be >= 1")
    sampler = GlauberSampler(sys, seed)
    if _is_monotone_hardcore(sys):
        first, second = _extreme_states(sys)
        note = "heuristic: monotone grand coupling from the extremes"
    else:
        first, second = sampler.greedy_state(), sampler.greedy_state(reverse=True)
        note = "heuristic: identity coupling of two greedy starts"
    streams = make_seed_streams(seed, trials)
    times = np.array(
        ordered_map(lambda s: _coalescence_time(sampler, first, second, horizon, s), streams, workers)
    )
    censored = bool(np.isinf(times).any())
    quantiles = {
        f"{q:g}": float(np.quantile(times, q, method="inverted_cdf")) for q in COUPLING_QUANTILES
    }
    t_mix = float(np.quantile(times, COUPLING_MIXING_QUANTILE, method="inverted_cdf"))
    finite = np.sort(times[np.isfinite(times)])
    curve = tuple((int(value), (i + 1) / trials) for i, value in enumerate(finite))
    if censored:
        logger.warning("%d of %d coupling trials hit the horizon", int(np.isinf(times).sum()), trials)
    return MixingEstimate(
        COUPLING,
        t_mix if math.isinf(t_mix) else max(int(t_mix), 1),
        curve,
        note=note,
        quantiles=quantiles,
        censored=censored,
        trials=trials,
    )


def make_seed_streams(seed: int, count: int) -> List[np.random.SeedSequence]:
    return np.random.SeedSequence(seed).spawn(count)


# Consistency checks


@dataclass(frozen=True)
class MixingConsistency:
    n: int
    constant: float
    t_mix: float
    ratio: Optional[float]
    entropy_ratio: Optional[float]
    min_log_exponent: float

    def to_dict(self) -> Dict[str, Any]:
        return {
            "n": self.n,
            "constant": self.constant,
            "t_mix": self.t_mix,
            "ratio": self.ratio,
            "entropy_ratio": self.entropy_ratio,
            "min_log_exponent": self.min_log_exponent,
        }


def at_mixing_consistency(
    sys: SpinSystem,
    constant: Union[float, Any],
    table: Optional[GibbsTable] = None,
    estimate: Optional[MixingEstimate] = None,
) -> MixingConsistency:
    """
    t_mix / (C n^2) and t_mix / (C n log n) for a multiplier C, plus
    -log(mu_min) / n. ``constant`` may be a composed report, whose
    composed_C is used. Ratios are None when C is not a finite positive number.
    """
    constant = float(getattr(constant, "composed_C", constant))
    t = table if table is not None else enumerate_gibbs(sys)
    estimate = estimate if estimate is not None else exact_mixing_time(sys, table=t)
    n = sys.n
    usable = math.isfinite(constant) and constant > 0 and math.isfinite(estimate.t_mix)
    ratio = estimate.t_mix / (constant * n * n) if usable else None
    entropy_ratio = None
    if usable and n > 1:
        entropy_ratio = estimate.t_mix / (constant * n * math.log(n))
    return MixingConsistency(
        n=n,
        constant=constant,
        t_mix=estimate.t_mix,
        ratio=ratio,
        entropy_ratio=entropy_ratio,
        min_log_exponent=-math.log(t.pi_min) / max(n, 1),
    )


@dataclass(frozen=True)
class FamilyConsistency:
    checks: Tuple[MixingConsistency, ...]
    reported_c: float
    bound: Optional[float]

    @property
    def holds(self) -> bool:
        return self.bound is None or self.reported_c <= self.bound


def consistency_family(
    checks: Sequence[MixingConsistency], bound: Optional[float] = None
) -> FamilyConsistency:
    """One constant c with t_mix <= c C n^2 across a family of instances."""
    ratios = [c.ratio for c in checks if c.ratio is not None]
    return FamilyConsistency(tuple(checks), max(ratios, default=0.0), bound)


@dataclass(frozen=True)
class GrowthTrend:
    points: Tuple[Tuple[int, float], ...]
    exponents: Tuple[float, ...]
    slope: Optional[float]

    @property
    def max_exponent(self) -> float:
        return max(self.exponents, default=0.0)

    def bounded_by(self, cap: float) -> bool:
        return self.max_exponent <= cap


def mixing_growth_trend(points: Sequence[Tuple[int, float]]) -> GrowthTrend:
    """log t_mix / log n per point and the log-log slope across the family."""
    usable = [(int(n), float(t)) for n, t in points if n >= 2 and 0 < t < math.inf]
    if len(usable) != len(points):
        raise InputValidationError("growth trend needs n >= 2 and finite positive t_mix")
    exponents = tuple(math.log(t) / math.log(n) for n, t in usable)
    slope = None
    if len(usable) >= 2:
        x = np.log([[n] for n, _ in usable])
        y = np.log([t for _, t in usable])
        slope = float(LinearRegression().fit(x, y).coef_[0])
    return GrowthTrend(tuple(usable), exponents, slope)
