"""
Error taxonomy shared by every SpinFactor module.

An inapplicable bound is not an error; calculators return it as a value.
"""

from typing import Any, Iterable, Optional


class SpinFactorError(Exception):
    """Base class for all SpinFactor errors."""


class InputValidationError(SpinFactorError, ValueError):
    """Malformed input: bad vertex ids, out-of-range parameters, bad files."""


class DomainError(SpinFactorError, ValueError):
    """Input is well formed but violates a model precondition."""


class ResourceLimitError(SpinFactorError, RuntimeError):
    """An enumeration or state-space cap was exceeded."""

    def __init__(self, message: str, cap_name: str, cap: int) -> None:
        super().__init__(f"{message} (cap {cap_name}={cap})")
        self.cap_name = cap_name
        self.cap = cap


class ComputationError(SpinFactorError, RuntimeError):
    """Numerical failure or randomized construction that never succeeded."""


class SeparatorNotFoundError(SpinFactorError):
    """No balanced separator within budget for some vertex set."""

    def __init__(self, vertices: Iterable[int], budget: int) -> None:
        self.vertices = tuple(sorted(vertices))
        self.budget = budget
        super().__init__(
            f"no balanced separator of size <= {budget} for U={list(self.vertices)}"
        )


class CompositionError(SpinFactorError):
    """Every strategy was inapplicable at some separator-tree node."""

    def __init__(self, node_index: int, reasons: Optional[Any] = None) -> None:
        self.node_index = node_index
        self.reasons = reasons
        super().__init__(f"no applicable strategy at node {node_index}: {reasons}")
