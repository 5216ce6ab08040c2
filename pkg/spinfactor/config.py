"""
Configuration constants for SpinFactor.

Contains caps, tolerances, thresholds and defaults used across the
enumeration engine, the bound calculators, the decomposition code and the
command-line surface.
"""

import math

# Enumeration Limits
ENUMERATION_CAP = 2**24  # raw assignments before pruning
EXACT_MIXING_CAP = 2**16  # feasible states for exact TV powering
DENSE_EIGEN_CAP = 2**12  # feasible states for dense eigensolvers
MIXING_CHUNK_SIZE = 256  # start states evolved together
MIXING_MAX_STEPS = 100_000

# Numerical Tolerances
PROBABILITY_SUM_TOLERANCE = 1e-12
IDENTITY_TOLERANCE = 1e-10
AUDIT_RELATIVE_TOLERANCE = 1e-9
EQUIVALENCE_TOLERANCE = 1e-8
ZERO_TOLERANCE = 1e-14

# Random Test Functions
VARIANCE_FUNCTION_RANGE = (-1.0, 1.0)
ENTROPY_FUNCTION_RANGE = (0.1, 2.0)
DEFAULT_AUDIT_FUNCTIONS = 1000
DEFAULT_BOUND_AUDIT_FUNCTIONS = 500

# Mixing
MIXING_THRESHOLD = 0.25
COUPLING_QUANTILES = (0.5, 0.75, 0.9, 0.99)
COUPLING_MIXING_QUANTILE = 0.75
DEFAULT_COUPLING_TRIALS = 100
DEFAULT_COUPLING_HORIZON = 1_000_000
RNG_ALGORITHM = "Philox"

# Separator Search
BALANCE_RATIO = 2.0 / 3.0
EXHAUSTIVE_SEPARATOR_LIMIT = 20
BAG_SUBSET_LIMIT = 12
DEFAULT_SEPARATOR_BUDGET = 2
DEFAULT_LEAF_SIZE = 1

# Low-Diameter Partition
LINIAL_SAKS_P = 0.5
LINIAL_SAKS_RETRY_CAP = 64
PARTITION_BOUND_MIN_N = 10

# Composition
PINNING_EXHAUSTIVE_CAP = 512
PINNING_SAMPLE_SIZE = 256
DEFAULT_STRATEGY_ORDER = (
    "model-closed-form",
    "measured-strong",
    "measured-crude",
    "exact-variance",
)
KNOWN_STRATEGIES = frozenset(DEFAULT_STRATEGY_ORDER) | {"measured-weak"}
COLORING_MIN_DELTA = 3
BALL_CHAIN_MULTIPLIER = 3.0

# Strong Spatial Mixing
SSM_GAMMA_MIN = 10.0
DEFAULT_SSM_RADIUS_CAP = 4
DEFAULT_PINNING_BUDGET = 4096

# Phi Recursion
PHI_GRID_MAX_LOG = 30 * math.log(2.0)  # k up to 2**30
PHI_GRID_POINTS = 64
PHI_SEARCH_MAX_LOG = 1e12

# Environment
THREADS_ENV_VAR = "SPINFACTOR_THREADS"
LOG_LEVEL_ENV_VAR = "SPINFACTOR_LOG_LEVEL"
DEFAULT_LOG_LEVEL = "INFO"

# CLI Exit Codes
EXIT_SUCCESS = 0
EXIT_VERIFICATION_FAILURE = 1
EXIT_USAGE_ERROR = 2
