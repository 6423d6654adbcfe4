"""Partial identification and point estimation of the ATE with a binary instrument."""

__version__ = "0.1.0"

from .bounds import (  # noqa: E402
    AssumptionSet,
    BoundsResult,
    ResponseTypeDistribution,
    ate_bounds,
    bounds_curve,
    build_bounds_lp,
    check_instrumental_inequalities,
    oracle_bounds,
)
from .estimators import IvEstimates, StrataEffectRanges, ate_sensitivity, iv_estimates  # noqa: E402
from .model import (  # noqa: E402
    ObservedLaw,
    TrialCounts,
    ValidationReport,
    law_from_counts,
    monotone_mle,
    validate_law,
)

__all__ = [
    "AssumptionSet",
    "BoundsResult",
    "IvEstimates",
    "ObservedLaw",
    "ResponseTypeDistribution",
    "StrataEffectRanges",
    "TrialCounts",
    "ValidationReport",
    "ate_bounds",
    "ate_sensitivity",
    "bounds_curve",
    "build_bounds_lp",
    "check_instrumental_inequalities",
    "iv_estimates",
    "law_from_counts",
    "monotone_mle",
    "oracle_bounds",
    "validate_law",
]
