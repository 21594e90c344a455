"""Authoritative defaults for the qsp library and the ``qsp`` CLI.

Every tolerance, horizon and limit used by the library lives here.  All
call sites import from this module; nothing re-defines a constant locally.

Determinism-sensitive values are annotated and must not be changed without
understanding the impact on report reproducibility.  Safety values guard
numerical feasibility and are never exposed as CLI flags.

Structured comment convention:
  # cat:<category> [det] [safety] [-- description]
"""

from __future__ import annotations

# ---------------------------------------------------------------------------
# Dimensions
# ---------------------------------------------------------------------------

MIN_DIMENSION: int = 2  # cat:limits safety -- smallest supported type-set size m
MAX_DIMENSION: int = 8  # cat:limits safety -- largest supported m (general product is O(m^9))

# ---------------------------------------------------------------------------
# Tolerances
# ---------------------------------------------------------------------------

STOCH_TOL: float = 1e-12  # cat:tolerance det -- absolute slack per stochasticity sum
KCE_TOL: float = 1e-9  # cat:tolerance det -- Kolmogorov-Chapman residual threshold
NINE_EQ_TOL: float = 1e-10  # cat:tolerance det -- twin-model nine-equation residual threshold
HOMOGENEITY_TOL: float = 1e-9  # cat:tolerance det -- shift / period comparison threshold
MONOTONE_SLACK: float = 1e-12  # cat:tolerance det -- non-strict monotonicity slack
BAND_SLACK: float = 1e-12  # cat:tolerance det -- slack on validity-band inequalities
DET_THRESHOLD: float = 1e-10  # cat:tolerance safety -- minimum absolute determinant of an invertible flow
NEAR_ZERO_DIVISOR: float = 1e-300  # cat:tolerance safety -- divisor magnitude treated as division by zero
CLAMP_THRESHOLD: float = 1e-12  # cat:tolerance det -- largest negative round-off clamped in distributions
SIMPLEX_TOL: float = 1e-12  # cat:tolerance det -- allowed deviation of sum(x) from 1 for a distribution
FLOW_SPLIT_TOL: float = 1e-9  # cat:tolerance det -- allowed deviation of sum_j beta_ijk from a_ik in inverse-flow splits

# ---------------------------------------------------------------------------
# Sampling / grids
# ---------------------------------------------------------------------------

DEFAULT_T_MAX: float = 10.0  # cat:grid det -- horizon for claims and bands
DEFAULT_CLAIM_SAMPLES: int = 1024  # cat:grid det -- samples per function-claim check
DEFAULT_GRID_POINTS: int = 12  # cat:grid det -- points on a uniform verification grid
DEFAULT_GRID_T_MAX: float = 5.0  # cat:grid det -- right end of the default verification grid
DEFAULT_PAIR_SAMPLES: int = 64  # cat:grid det -- sample times whose pairs are swept by two-parameter validity checks
CUTOFF_MIDPOINT_OFFSET: float = 0.05  # cat:grid det -- offset of the extra points placed around cutoffs
CONTINUITY_PROBE: float = 1e-6  # cat:grid det -- step used to probe t -> s+ limits
DEFAULT_PERIOD_CANDIDATES: tuple[float, ...] = (  # cat:grid det -- periods scanned by the classifier
    1.0, 2.0, 3.141592653589793, 6.283185307179586,
)
ORACLE_SAMPLE_RATE: float = 0.05  # cat:grid det -- share of products re-checked against the brute-force oracle

# ---------------------------------------------------------------------------
# Output
# ---------------------------------------------------------------------------

CSV_FLOAT_FORMAT: str = "%.17g"  # cat:output det -- float formatting for CSV rows
ENV_DEFAULT_TOL: str = "QSP_DEFAULT_TOL"  # cat:output -- env var overriding KCE_TOL in the CLI

# ---------------------------------------------------------------------------
# CLI exit codes
# ---------------------------------------------------------------------------

EXIT_OK: int = 0  # cat:exit safety -- every requested check passed
EXIT_CHECK_FAILED: int = 1  # cat:exit safety -- a check or a family construction failed
EXIT_CONFIG_ERROR: int = 2  # cat:exit safety -- configuration or expression error
EXIT_INTERNAL_ERROR: int = 3  # cat:exit safety -- evaluation error during a sweep
