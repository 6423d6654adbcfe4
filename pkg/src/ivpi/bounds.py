"""Linear programs over principal strata that bound the average treatment effect.

Each unit has a compliance type (how treatment responds to the instrument)
and an outcome type (how the outcome responds to treatment).  The joint
distribution over the 4 x 4 response types is the LP variable; the observed
law fixes eight linear functionals of it, and the ATE is the linear objective
``P(helped) - P(hurt)``.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field, replace
from typing import Optional, Sequence

import numpy as np

from . import lp as _lp
from .model import CELLS, FATAL, Finding, ObservedLaw, ValidationReport, require_valid

ALWAYS_TAKER, NEVER_TAKER, COMPLIER, DEFIER = "always_taker", "never_taker", "complier", "defier"
COMPLIANCE_TYPES = (ALWAYS_TAKER, NEVER_TAKER, COMPLIER, DEFIER)
DOOMED, HELPED, HURT, IMMUNE = "doomed", "helped", "hurt", "immune"
OUTCOME_TYPES = (DOOMED, HELPED, HURT, IMMUNE)
RESPONSE_TYPES = tuple(itertools.product(COMPLIANCE_TYPES, OUTCOME_TYPES))

CAP_NT = "cap_never_taker_treated"
CAP_AT = "cap_always_taker_untreated"
CAP_NAMES = (CAP_NT, CAP_AT)

TOL = 1e-9


def treatment_under(ctype: str, z: int) -> int:
    return {ALWAYS_TAKER: 1, NEVER_TAKER: 0, COMPLIER: z, DEFIER: 1 - z}[ctype]


def outcome_under(otype: str, x: int) -> int:
    return {DOOMED: 1, HELPED: x, HURT: 1 - x, IMMUNE: 0}[otype]


def _index(ctype: str, otype: str) -> int:
    return COMPLIANCE_TYPES.index(ctype) * 4 + OUTCOME_TYPES.index(otype)


# A[cell, k] = 1 when response type k produces cell (z, x, y) under Z=z.
_CELL_MATRIX = np.array(
    [
        [1.0 if treatment_under(c, z) == x and outcome_under(r, x) == y else 0.0 for c, r in RESPONSE_TYPES]
        for z, x, y in CELLS
    ]
)
_ATE_OBJECTIVE = np.array([1.0 if r == HELPED else -1.0 if r == HURT else 0.0 for _, r in RESPONSE_TYPES])


@dataclass(frozen=True)
class ResponseTypeDistribution:
    """Weights over (compliance type, outcome type); flat index ``4 * c + r``."""

    q: np.ndarray

    def __post_init__(self):
        q = np.array(self.q, dtype=float).reshape(-1)
        if q.shape != (16,):
            raise ValueError(f"need 16 response-type weights, got {q.shape[0]}")
        if np.any(q < -TOL) or abs(q.sum() - 1.0) > TOL:
            raise ValueError("response-type weights must be nonnegative and sum to 1")
        q.setflags(write=False)
        object.__setattr__(self, "q", q)

    @classmethod
    def from_mapping(cls, weights) -> "ResponseTypeDistribution":
        q = np.zeros(16)
        for (c, r), w in weights.items():
            q[_index(c, r)] = w
        return cls(q)

    def __getitem__(self, key: tuple[str, str]) -> float:
        return float(self.q[_index(*key)])

    def as_mapping(self) -> dict[tuple[str, str], float]:
        return {k: float(v) for k, v in zip(RESPONSE_TYPES, self.q)}

    def share(self, ctype: str) -> float:
        i = COMPLIANCE_TYPES.index(ctype) * 4
        return float(self.q[i:i + 4].sum())

    def stratum_effect(self, ctype: str) -> Optional[float]:
        """ATE within one compliance stratum; None for an empty stratum."""
        s = self.share(ctype)
        if s <= 0:
            return None
        return (self[ctype, HELPED] - self[ctype, HURT]) / s

    def stratum_risk(self, ctype: str, x: int) -> Optional[float]:
        """P(Y=1 | stratum, treatment forced to x)."""
        s = self.share(ctype)
        if s <= 0:
            return None
        return sum(self[ctype, r] for r in OUTCOME_TYPES if outcome_under(r, x)) / s

    @property
    def ate(self) -> float:
        return float(_ATE_OBJECTIVE @ self.q)

    @property
    def monotone(self) -> bool:
        return self.share(DEFIER) <= TOL

    def law(self) -> ObservedLaw:
        """The observed law this distribution induces (exclusion holds by construction)."""
        return ObservedLaw((_CELL_MATRIX @ self.q).reshape(2, 2, 2))

    def satisfies(self, assumptions: "AssumptionSet") -> bool:
        if assumptions.monotonicity and not self.monotone:
            return False
        for cap, ctype, x in ((assumptions.cap_never_taker_treated, NEVER_TAKER, 1),
                              (assumptions.cap_always_taker_untreated, ALWAYS_TAKER, 0)):
            if cap is None:
                continue
            risk = self.stratum_risk(ctype, x)
            if risk is not None and risk > cap + TOL:
                return False
        return True


@dataclass(frozen=True)
class AssumptionSet:
    monotonicity: bool = False
    cap_never_taker_treated: Optional[float] = None
    cap_always_taker_untreated: Optional[float] = None

    def __post_init__(self):
        for name in CAP_NAMES:
            v = getattr(self, name)
            if v is not None and not (0.0 <= v <= 1.0):
                raise ValueError(f"{name} must lie in [0, 1], got {v}")

    def with_cap(self, name: str, value: Optional[float]) -> "AssumptionSet":
        if name not in CAP_NAMES:
            raise ValueError(f"unknown cap {name!r}; expected one of {CAP_NAMES}")
        return replace(self, **{name: value})

    def describe(self) -> str:
        parts = []
        if self.monotonicity:
            parts.append("monotonicity")
        if self.cap_never_taker_treated is not None:
            parts.append(f"cap_nt={self.cap_never_taker_treated:g}")
        if self.cap_always_taker_untreated is not None:
            parts.append(f"cap_at={self.cap_always_taker_untreated:g}")
        return ", ".join(parts) if parts else "none"


BOUNDED = "bounded"
INFEASIBLE = "infeasible"


@dataclass(frozen=True)
class BoundsResult:
    status: str
    lower: Optional[float] = None
    upper: Optional[float] = None
    lower_witness: Optional[ResponseTypeDistribution] = None
    upper_witness: Optional[ResponseTypeDistribution] = None
    assumptions: AssumptionSet = field(default_factory=AssumptionSet)

    @property
    def bounded(self) -> bool:
        return self.status == BOUNDED

    @property
    def width(self) -> Optional[float]:
        return None if not self.bounded else self.upper - self.lower

    def contains(self, value: float, tol: float = TOL) -> bool:
        return self.bounded and self.lower - tol <= value <= self.upper + tol


def build_bounds_lp(law: ObservedLaw, assumptions: AssumptionSet, sense: str = "min") -> _lp.LinearProgram:
    """LP whose optimum is the lower (``sense="min"``) or upper ATE bound.

    The returned program always minimizes or maximizes ``objective``
    according to ``sense``; the objective itself is the ATE in both cases.
    """
    if sense not in ("min", "max"):
        raise ValueError(f"sense must be 'min' or 'max', got {sense!r}")
    A_eq = [np.ones(16)]
    b_eq = [1.0]
    for row, cell in zip(_CELL_MATRIX, CELLS):
        A_eq.append(row)
        b_eq.append(law.p[cell])
    if assumptions.monotonicity:
        for r in OUTCOME_TYPES:
            row = np.zeros(16)
            row[_index(DEFIER, r)] = 1.0
            A_eq.append(row)
            b_eq.append(0.0)

    A_ub, b_ub = [], []
    # cap * stratum mass >= mass with Y=1 under the counterfactual treatment;
    # vacuous when the stratum is empty. A cap of 1 adds no row at all.
    for cap, ctype, x in ((assumptions.cap_never_taker_treated, NEVER_TAKER, 1),
                          (assumptions.cap_always_taker_untreated, ALWAYS_TAKER, 0)):
        if cap is None or cap >= 1.0:
            continue
        row = np.zeros(16)
        for r in OUTCOME_TYPES:
            row[_index(ctype, r)] = float(outcome_under(r, x)) - cap
        A_ub.append(row)
        b_ub.append(0.0)

    return _lp.LinearProgram(_ATE_OBJECTIVE, A_eq, b_eq, A_ub or None, b_ub or None)


def ate_bounds(law: ObservedLaw, assumptions: AssumptionSet = AssumptionSet(), solver=None) -> BoundsResult:
    """Sharp bounds on the ATE under ``assumptions``.

    An infeasible program means the law is incompatible with the model (or
    the caps contradict it); that is reported via ``status``, not raised.
    ``solver`` maps ``(lp, sense)`` to an :class:`~ivpi.lp.LpSolution` and
    defaults to the simplex kernel.
    """
    require_valid(law)
    if solver is None:
        solver = lambda prog, sense: _lp.solve_min(prog) if sense == "min" else _lp.solve_max(prog)
    lo = solver(build_bounds_lp(law, assumptions, "min"), "min")
    hi = solver(build_bounds_lp(law, assumptions, "max"), "max")
    if not (lo.optimal and hi.optimal):
        if _lp.UNBOUNDED in (lo.status, hi.status):
            raise AssertionError("bounds LP cannot be unbounded: variables live in a simplex")
        return BoundsResult(INFEASIBLE, assumptions=assumptions)
    return BoundsResult(
        BOUNDED,
        lo.value,
        hi.value,
        ResponseTypeDistribution(_clean(lo.witness)),
        ResponseTypeDistribution(_clean(hi.witness)),
        assumptions,
    )


def oracle_bounds(law: ObservedLaw, assumptions: AssumptionSet = AssumptionSet()) -> BoundsResult:
    """Same as :func:`ate_bounds` but solved by basis enumeration."""
    return ate_bounds(law, assumptions, solver=lambda prog, sense: _lp.vertex_oracle(prog, sense))


def _clean(q: np.ndarray) -> np.ndarray:
    q = np.clip(q, 0.0, None)
    return q / q.sum()


def check_instrumental_inequalities(law: ObservedLaw, tol: float = TOL) -> ValidationReport:
    """Pearl's instrumental inequalities ``sum_y max_z p(x, y | z) <= 1`` for each x."""
    require_valid(law)
    findings = []
    for x in (0, 1):
        total = sum(max(law.p[0, x, y], law.p[1, x, y]) for y in (0, 1))
        margin = 1.0 - total
        if margin < -tol:
            findings.append(Finding(
                FATAL, "instrumental_inequality",
                f"x={x}: sum_y max_z p(x,y|z) = {total:.12g} exceeds 1 by {-margin:.3g}",
            ))
        else:
            findings.append(Finding("info", "instrumental_inequality", f"x={x}: sum = {total:.12g}, margin {margin:.3g}"))
    return ValidationReport(tuple(findings))


def bounds_curve(
    law: ObservedLaw,
    base: AssumptionSet,
    cap_name: str,
    grid: Sequence[float],
) -> list[tuple[float, BoundsResult]]:
    """Bounds as one cap is swept over ``grid`` (other assumptions held at ``base``)."""
    grid = [float(g) for g in grid]
    if not grid:
        raise ValueError("grid must not be empty")
    if cap_name not in CAP_NAMES:
        raise ValueError(f"unknown cap {cap_name!r}; expected one of {CAP_NAMES}")
    if any(not (0.0 <= g <= 1.0) for g in grid):
        raise ValueError("grid values must lie in [0, 1]")
    if any(b <= a for a, b in zip(grid, grid[1:])):
        raise ValueError("grid must be strictly increasing")
    return [(eps, ate_bounds(law, base.with_cap(cap_name, eps))) for eps in grid]
