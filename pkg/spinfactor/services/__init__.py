"""
Analysis services for approximate tensorisation.

Contains the core algorithms for:
- Exact Gibbs enumeration, functionals and heat-bath chains
- Two-block and multivariable factorisation constants
- Separator trees and low-diameter partitions
- Recursive composition along separator trees
- Spatial mixing checks and the recursive multiplier solver
- Glauber dynamics simulation and mixing estimates

Exports use British English names by default, with aliases for the
American spellings.
"""

from .composer import FactorisationComposer, FactorizationReport, compose_at
from .decomposition import SeparatorTree, build_separator_tree, low_diameter_partition
from .exact_engine import GibbsTable, enumerate_gibbs
from .glauber import GlauberSampler, coupling_mixing_estimate, exact_mixing_time
from .phi_recursion import phi_recursion_solve
from .spatial_mixing import ssm_check

# Aliases (American spelling)
FactorizationComposer = FactorisationComposer  # type: ignore
FactorisationReport = FactorizationReport  # type: ignore

__all__ = [
    "FactorisationComposer",
    "FactorizationReport",
    "compose_at",
    "SeparatorTree",
    "build_separator_tree",
    "low_diameter_partition",
    "GibbsTable",
    "enumerate_gibbs",
    "GlauberSampler",
    "coupling_mixing_estimate",
    "exact_mixing_time",
    "phi_recursion_solve",
    "ssm_check",
    # Aliases
    "FactorizationComposer",
    "FactorisationReport",
]
