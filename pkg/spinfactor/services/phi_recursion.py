"""
Numeric solver for the recursive multiplier bounds.

Two recursions are supported, both in natural logarithms with k carried as
L = log k so that astronomically large k0 stay representable:

``log-logt``  phi(k) <= max(100 log^2 k * phi(log^t k), phi(k0)), envelope phi(k0) log^3 k
``log2``      phi(k) <= max(6 log k * phi(t log^(2d) k), phi(k0)),  envelope phi(k0) log^2 k
"""

import math
from dataclasses import dataclass
from typing import Any, Callable, Dict, List, Optional, Tuple

import numpy as np  # type: ignore
from scipy.optimize import brentq  # type: ignore

from spinfactor.config import PHI_GRID_MAX_LOG, PHI_GRID_POINTS, PHI_SEARCH_MAX_LOG
from spinfactor.exceptions import InputValidationError
from spinfactor.utils.logging_config import get_logger

logger = get_logger("phi_recursion")

LOG_LOGT = "log-logt"
LOG2 = "log2"
FORMS = (LOG_LOGT, LOG2)


@dataclass(frozen=True)
class RecursionForm:
    """Step multiplier, inner argument and envelope exponent of one recursion."""

    name: str
    multiplier: Callable[[float], float]
    inner: Callable[[float], float]
    exponent: int
    side_condition: Callable[[float], float]


def recursion_form(form: str, t: float, d: float = 1.0) -> RecursionForm:
    if form == LOG_LOGT:
        if t < 1.0:
            raise InputValidationError("exponent t must be >= 1")
        return RecursionForm(
            name=form,
            multiplier=lambda L: 100.0 * L * L,
            inner=lambda L: t * math.log(L),
            exponent=3,
            # 100 t^3 (log log k)^3 <= log k and log^t k < k
            side_condition=lambda L: min(
                L - 100.0 * t ** 3 * math.log(L) ** 3, L - t * math.log(L)
            ),
        )
    if form == LOG2:
        if t <= 0.0 or d <= 0.0:
            raise InputValidationError("t and d must be positive")
        inner = lambda L: math.log(t) + 2.0 * d * math.log(L)  # noqa: E731
        return RecursionForm(
            name=form,
            multiplier=lambda L: 6.0 * L,
            inner=inner,
            exponent=2,
            side_condition=lambda L: min(L - 6.0 * max(inner(L), 0.0) ** 2, L - inner(L)),
        )
    raise InputValidationError(f"unknown recursion form {form!r}; expected one of {FORMS}")


def minimal_log_k0(spec: RecursionForm, search_max: float = PHI_SEARCH_MAX_LOG) -> float:
    """Least L0 = log k0 such that the side condition holds for every L >= L0."""
    grid = np.geomspace(1.0 + 1e-9, search_max, 4096)
    values = np.array([spec.side_condition(float(L)) for L in grid])
    failing = np.flatnonzero(values < 0.0)
    if failing.size == 0:
        return float(grid[0])
    last = int(failing[-1])
    if last == len(grid) - 1:
        raise InputValidationError(f"side condition fails up to log k = {search_max:g}")
    root = brentq(spec.side_condition, float(grid[last]), float(grid[last + 1]), xtol=1e-12, rtol=1e-12)
    # nudge past the root so the condition holds at L0 itself
    candidate = float(root)
    while spec.side_condition(candidate) < 0.0:
        candidate = np.nextafter(candidate, math.inf) * (1.0 + 1e-12)
    return float(candidate)


@dataclass(frozen=True)
class PhiRow:
    log_k: float
    phi: float
    envelope: float

    @property
    def holds(self) -> bool:
        return self.phi <= self.envelope * (1.0 + 1e-12)


@dataclass(frozen=True)
class PhiRecursionResult:
    form: str
    t: float
    d: float
    phi0: float
    log_k0: float
    minimal_log_k0: float
    rows: Tuple[PhiRow, ...]

    @property
    def holds(self) -> bool:
        return all(row.holds for row in self.rows)

    def to_dict(self) -> Dict[str, Any]:
        return {
            "form": self.form,
            "t": self.t,
            "d": self.d,
            "phi0": self.phi0,
            "log_k0": self.log_k0,
            "minimal_log_k0": self.minimal_log_k0,
            "envelope_holds": self.holds,
            "rows": [[r.log_k, r.phi, r.envelope, r.holds] for r in self.rows],
        }


def phi_bound(spec: RecursionForm, log_k: float, log_k0: float, phi0: float) -> float:
    """Iterate the recursion from log k down to the base case."""
    if log_k < log_k0:
        return phi0
    inner = spec.inner(log_k)
    if inner >= log_k:
        raise InputValidationError(f"recursion does not descend at log k = {log_k:g}")
    return max(spec.multiplier(log_k) * phi_bound(spec, inner, log_k0, phi0), phi0)


def phi_recursion_solve(
    t: float,
    log_k0: Optional[float] = None,
    form: str = LOG_LOGT,
    d: float = 1.0,
    phi0: float = 1.0,
    grid_points: int = PHI_GRID_POINTS,
    max_log_k: float = PHI_GRID_MAX_LOG,
) -> PhiRecursionResult:
    """
    Tabulate phi(k) bounds on a geometric grid of log k and compare them
    with the closed-form envelope. The grid covers [1, max_log_k] and a
    stretch above log k0 so the recursive branch is exercised.
    """
    if phi0 <= 0.0:
        raise InputValidationError("phi(k0) must be positive")
    if grid_points < 2:
        raise InputValidationError("grid needs at least two points")
    spec = recursion_form(form, t, d)
    minimal = minimal_log_k0(spec)
    if log_k0 is None:
        log_k0 = minimal
    elif log_k0 < minimal:
        raise InputValidationError(
            f"side condition fails for log k0 = {log_k0:g}; minimal valid log k0 is {minimal:.6g}"
        )

    grid = np.concatenate(
        [
            np.geomspace(1.0, max(max_log_k, 1.0 + 1e-9), grid_points),
            log_k0 * np.geomspace(1.0, 1e3, max(grid_points // 4, 2)),
        ]
    )
    rows: List[PhiRow] = []
    for L in np.unique(grid):
        value = phi_bound(spec, float(L), log_k0, phi0)
        rows.append(PhiRow(float(L), value, phi0 * float(L) ** spec.exponent))
    result = PhiRecursionResult(form, t, d, phi0, log_k0, minimal, tuple(rows))
    logger.info(
        "phi recursion %s: log k0=%.6g, %d grid points, envelope holds=%s",
        form, log_k0, len(rows), result.holds,
    )
    return result
