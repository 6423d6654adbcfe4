"""Wald estimator, compliance-type shares, and a stratum-decomposition sensitivity analysis."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

from .model import ObservedLaw, require_valid

WEAK_INSTRUMENT_TOL = 1e-9


class WeakInstrumentError(ValueError):
    pass


@dataclass(frozen=True)
class IvEstimates:
    itt_y: float
    itt_x: float
    wald: Optional[float]
    complier_share: float
    always_taker_share: float
    never_taker_share: float

    @property
    def weak_instrument(self) -> bool:
        return self.wald is None


def iv_estimates(law: ObservedLaw) -> IvEstimates:
    """Intention-to-treat contrasts, the Wald ratio, and stratum shares under monotonicity.

    ``wald`` is None when ``|itt_x| <= 1e-9``.
    """
    require_valid(law)
    itt_y = law.outcome(1) - law.outcome(0)
    itt_x = law.treated(1) - law.treated(0)
    wald = itt_y / itt_x if abs(itt_x) > WEAK_INSTRUMENT_TOL else None
    return IvEstimates(
        itt_y=itt_y,
        itt_x=itt_x,
        wald=wald,
        complier_share=itt_x,
        always_taker_share=law.treated(0),
        never_taker_share=1.0 - law.treated(1),
    )


@dataclass(frozen=True)
class StrataEffectRanges:
    """Hypothesized ranges for the always-taker and never-taker effects."""

    always_taker_effect: tuple[float, float]
    never_taker_effect: tuple[float, float]

    def __post_init__(self):
        for name in ("always_taker_effect", "never_taker_effect"):
            lo, hi = (float(v) for v in getattr(self, name))
            if not (-1.0 <= lo <= hi <= 1.0):
                raise ValueError(f"{name} must satisfy -1 <= lo <= hi <= 1, got ({lo}, {hi})")
            object.__setattr__(self, name, (lo, hi))


@dataclass(frozen=True)
class SensitivityResult:
    lower: float
    upper: float
    late: float
    complier_term: float
    always_taker_terms: tuple[float, float]
    never_taker_terms: tuple[float, float]
    estimates: IvEstimates

    @property
    def width(self) -> float:
        return self.upper - self.lower


def ate_sensitivity(law: ObservedLaw, ranges: StrataEffectRanges) -> SensitivityResult:
    """Range of the ATE implied by hypothesized effects in the non-complier strata.

    Uses ``ATE = pi_co * LATE + pi_at * ATE_at + pi_nt * ATE_nt`` with the
    Wald ratio as the LATE, which presumes no defiers.
    """
    est = iv_estimates(law)
    if est.wald is None:
        raise WeakInstrumentError(f"instrument has no effect on treatment (itt_x = {est.itt_x:.3g})")
    co = est.complier_share * est.wald
    at = tuple(est.always_taker_share * a for a in ranges.always_taker_effect)
    nt = tuple(est.never_taker_share * n for n in ranges.never_taker_effect)
    return SensitivityResult(
        lower=co + at[0] + nt[0],
        upper=co + at[1] + nt[1],
        late=est.wald,
        complier_term=co,
        always_taker_terms=at,
        never_taker_terms=nt,
        estimates=est,
    )
