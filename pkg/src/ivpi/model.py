"""Observable data for binary instrument / treatment / outcome studies.

Cells are indexed ``[z, x, y]`` throughout: instrument level, treatment
level, outcome level, each in {0, 1}.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Iterable, Mapping

import numpy as np

CELLS: tuple[tuple[int, int, int], ...] = tuple(itertools.product((0, 1), repeat=3))

CONSTRUCTED_TOL = 1e-12
USER_TOL = 1e-9

FATAL = "fatal"
WARNING = "warning"
INFO = "info"


def _frozen(arr: np.ndarray) -> np.ndarray:
    arr = np.array(arr, dtype=float, copy=True)
    arr.setflags(write=False)
    return arr


def _check_level(value, name: str) -> int:
    if isinstance(value, (bool, np.bool_)):
        value = int(value)
    if isinstance(value, (int, np.integer)) and value in (0, 1):
        return int(value)
    raise ValueError(f"{name} must be 0 or 1, got {value!r}")


@dataclass(frozen=True)
class TrialCounts:
    """Cell counts ``n(z, x, y)`` for the eight instrument/treatment/outcome cells."""

    n: np.ndarray

    def __post_init__(self):
        arr = np.asarray(self.n)
        if arr.shape != (2, 2, 2):
            raise ValueError(f"counts must have shape (2, 2, 2), got {arr.shape}")
        if not np.all(np.isfinite(arr)) or np.any(arr != np.round(arr)):
            raise ValueError("counts must be integers")
        if np.any(arr < 0):
            raise ValueError("counts must be nonnegative")
        for z in (0, 1):
            if arr[z].sum() <= 0:
                raise ValueError(f"instrument arm z={z} has no observations")
        out = np.array(arr, dtype=np.int64)
        out.setflags(write=False)
        object.__setattr__(self, "n", out)

    @classmethod
    def from_mapping(cls, counts: Mapping[tuple[int, int, int], int]) -> "TrialCounts":
        """Build from a ``{(z, x, y): count}`` mapping holding all eight cells."""
        arr = np.zeros((2, 2, 2), dtype=np.int64)
        seen = set()
        for key, value in counts.items():
            z, x, y = (_check_level(v, name) for v, name in zip(key, "zxy"))
            if (z, x, y) in seen:
                raise ValueError(f"duplicate cell {(z, x, y)}")
            seen.add((z, x, y))
            if isinstance(value, float) and not value.is_integer():
                raise ValueError(f"count for cell {(z, x, y)} is not an integer: {value}")
            arr[z, x, y] = int(value)
        missing = sorted(set(CELLS) - seen)
        if missing:
            raise ValueError(f"missing cells: {missing}")
        return cls(arr)

    @classmethod
    def from_records(cls, records: Iterable[tuple[int, int, int]]) -> "TrialCounts":
        """Aggregate raw unit records ``(z, x, y)``."""
        arr = np.zeros((2, 2, 2), dtype=np.int64)
        for i, rec in enumerate(records):
            if len(rec) != 3:
                raise ValueError(f"record {i} must have 3 fields, got {len(rec)}")
            z, x, y = (_check_level(v, name) for v, name in zip(rec, "zxy"))
            arr[z, x, y] += 1
        return cls(arr)

    def arm_totals(self) -> np.ndarray:
        return self.n.sum(axis=(1, 2))

    def as_mapping(self) -> dict[tuple[int, int, int], int]:
        return {c: int(self.n[c]) for c in CELLS}

    @property
    def total(self) -> int:
        return int(self.n.sum())


@dataclass(frozen=True)
class ObservedLaw:
    """Conditional probabilities ``p[z, x, y] = P(X=x, Y=y | Z=z)``.

    Construction only checks shape and finiteness so that malformed laws can
    still be inspected with :func:`validate_law`.
    """

    p: np.ndarray

    def __post_init__(self):
        arr = np.asarray(self.p, dtype=float)
        if arr.shape != (2, 2, 2):
            raise ValueError(f"law must have shape (2, 2, 2), got {arr.shape}")
        if not np.all(np.isfinite(arr)):
            raise ValueError("law entries must be finite")
        object.__setattr__(self, "p", _frozen(arr))

    @classmethod
    def from_mapping(cls, probs: Mapping[tuple[int, int, int], float]) -> "ObservedLaw":
        arr = np.full((2, 2, 2), np.nan)
        for key, value in probs.items():
            z, x, y = (_check_level(v, name) for v, name in zip(key, "zxy"))
            if not np.isnan(arr[z, x, y]):
                raise ValueError(f"duplicate cell {(z, x, y)}")
            arr[z, x, y] = float(value)
        missing = [c for c in CELLS if np.isnan(arr[c])]
        if missing:
            raise ValueError(f"missing cells: {missing}")
        return cls(arr)

    def as_mapping(self) -> dict[tuple[int, int, int], float]:
        return {c: float(self.p[c]) for c in CELLS}

    def treated(self, z: int) -> float:
        """P(X=1 | Z=z)."""
        return float(self.p[z, 1].sum())

    def outcome(self, z: int) -> float:
        """P(Y=1 | Z=z)."""
        return float(self.p[z, :, 1].sum())


@dataclass(frozen=True)
class Finding:
    severity: str
    code: str
    message: str

    def __str__(self):
        return f"[{self.severity}] {self.code}: {self.message}"


@dataclass(frozen=True)
class ValidationReport:
    messages: tuple[Finding, ...] = field(default_factory=tuple)

    @property
    def ok(self) -> bool:
        return not any(f.severity == FATAL for f in self.messages)

    @property
    def fatal(self) -> tuple[Finding, ...]:
        return tuple(f for f in self.messages if f.severity == FATAL)

    def __bool__(self):
        return self.ok


def law_from_counts(counts: TrialCounts) -> ObservedLaw:
    """Empirical law ``n(z, x, y) / n(z, ., .)``."""
    n = counts.n.astype(float)
    totals = n.sum(axis=(1, 2))
    if np.any(totals <= 0):
        raise ValueError("instrument arm with zero total")
    law = ObservedLaw(n / totals[:, None, None])
    assert np.all(np.abs(law.p.sum(axis=(1, 2)) - 1.0) <= CONSTRUCTED_TOL)
    return law


def validate_law(law: ObservedLaw, tol: float = USER_TOL) -> ValidationReport:
    """Range and per-arm normalization checks. Findings are returned, never raised."""
    findings = []
    p = law.p
    for c in CELLS:
        v = p[c]
        if v < -tol or v > 1 + tol:
            findings.append(Finding(FATAL, "range", f"p(x={c[1]},y={c[2]}|z={c[0]}) = {v!r} outside [0, 1]"))
    for z in (0, 1):
        s = p[z].sum()
        if abs(s - 1.0) > tol:
            findings.append(Finding(FATAL, "normalization", f"arm z={z} sums to {s!r}, not 1"))
    return ValidationReport(tuple(findings))


def require_valid(law: ObservedLaw, tol: float = USER_TOL) -> None:
    report = validate_law(law, tol)
    if not report.ok:
        raise ValueError("invalid law: " + "; ".join(str(f) for f in report.fatal))


# Constrained estimation under no-defiers --------------------------------------

# Under monotonicity the observed law must satisfy
#   p(1, y | 1) >= p(1, y | 0)   (always-takers plus compliers vs always-takers)
#   p(0, y | 0) >= p(0, y | 1)   (never-takers plus compliers vs never-takers)
# for y in {0, 1}.  Each constraint pairs one (x, y) cell across the two arms.
MONOTONE_PAIRS: tuple[tuple[int, int, int], ...] = (
    (1, 1, 0),  # (x, y, arm expected to dominate)
    (1, 0, 0),
    (0, 1, 1),
    (0, 0, 1),
)


def monotonicity_margins(law: ObservedLaw) -> dict[tuple[int, int], float]:
    """Margin of each no-defier inequality, keyed by (x, y); negative means violated."""
    p = law.p
    out = {}
    for x, y, _ in MONOTONE_PAIRS:
        out[(x, y)] = float(p[1, x, y] - p[0, x, y]) if x == 1 else float(p[0, x, y] - p[1, x, y])
    return out


@dataclass(frozen=True)
class MonotoneFit:
    """Maximum-likelihood law under the instrumental conditions plus monotonicity."""

    law: ObservedLaw
    pooled_cells: tuple[tuple[int, int], ...]
    loglik_gap: float
    max_shift: float

    @property
    def projected(self) -> bool:
        return bool(self.pooled_cells)


def _loglik(n: np.ndarray, p: np.ndarray) -> float:
    mask = n > 0
    if np.any(p[mask] <= 0):
        return -np.inf
    return float(np.sum(n[mask] * np.log(p[mask])))


def monotone_mle(counts: TrialCounts) -> MonotoneFit:
    """Maximize the two-arm multinomial likelihood subject to no defiers.

    The feasible set is cut out by four linear inequalities, each tying one
    ``(x, y)`` cell across arms.  For any set of active constraints the
    optimum pools the tied cells (``t = m / N`` with ``m`` the pooled count)
    and rescales the remaining cells of each arm proportionally to their
    counts, so the global optimum is found by enumerating the 16 active sets
    and keeping the best feasible candidate (the objective is concave).
    """
    n = counts.n.astype(float)
    totals = n.sum(axis=(1, 2))
    grand = totals.sum()
    empirical = n / totals[:, None, None]

    best = None
    cells = [(x, y) for x, y, _ in MONOTONE_PAIRS]
    for k in range(len(cells) + 1):
        for active in itertools.combinations(cells, k):
            p = np.zeros((2, 2, 2))
            pooled = 0.0
            for x, y in active:
                t = (n[0, x, y] + n[1, x, y]) / grand
                p[0, x, y] = p[1, x, y] = t
                pooled += t
            free = [c for c in cells if c not in active]
            for z in (0, 1):
                rest = sum(n[z, x, y] for x, y in free)
                for x, y in free:
                    if rest > 0:
                        p[z, x, y] = (1.0 - pooled) * n[z, x, y] / rest
                    else:
                        p[z, x, y] = (1.0 - pooled) / len(free)
            law = ObservedLaw(p)
            if min(monotonicity_margins(law).values()) < -CONSTRUCTED_TOL:
                continue
            ll = _loglik(n, p)
            if best is None or ll > best[0] + 1e-12:
                best = (ll, active, law)

    assert best is not None  # pooling every cell always gives identical arms
    ll, active, law = best
    return MonotoneFit(
        law=law,
        pooled_cells=tuple(active),
        loglik_gap=float(_loglik(n, empirical) - ll),
        max_shift=float(np.max(np.abs(law.p - empirical))),
    )
