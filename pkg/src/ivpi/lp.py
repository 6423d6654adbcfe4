"""Small dense linear programs: two-phase simplex and a basis-enumeration oracle.

Problems have the form::

    optimize  c @ x
    s.t.      A_eq @ x == b_eq
              A_ub @ x <= b_ub
              x >= 0

Everything is float64.  Exact rational arithmetic would be a drop-in upgrade
(the tableau code only uses +, -, *, / and comparisons) but is unnecessary
for the 16-variable programs this package solves.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

OPTIMAL = "optimal"
INFEASIBLE = "infeasible"
UNBOUNDED = "unbounded"

PIVOT_TOL = 1e-10
FEAS_TOL = 1e-9
MAX_BASES = 10**7


class LPSizeError(ValueError):
    """Raised when basis enumeration would exceed the configured limit."""


def _matrix(rows, width: int, name: str) -> np.ndarray:
    if rows is None:
        return np.zeros((0, width))
    arr = np.asarray(rows, dtype=float)
    if arr.size == 0:
        return np.zeros((0, width))
    if arr.ndim != 2 or arr.shape[1] != width:
        raise ValueError(f"{name} must have {width} columns, got shape {arr.shape}")
    return arr


def _vector(values, length: int, name: str) -> np.ndarray:
    if values is None:
        values = []
    arr = np.asarray(values, dtype=float).reshape(-1)
    if arr.shape[0] != length:
        raise ValueError(f"{name} must have length {length}, got {arr.shape[0]}")
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} must be finite")
    return arr


@dataclass(frozen=True)
class LinearProgram:
    objective: np.ndarray
    A_eq: np.ndarray
    b_eq: np.ndarray
    A_ub: np.ndarray
    b_ub: np.ndarray

    def __init__(self, objective, A_eq=None, b_eq=None, A_ub=None, b_ub=None):
        c = np.asarray(objective, dtype=float).reshape(-1)
        if not np.all(np.isfinite(c)):
            raise ValueError("objective must be finite")
        n = c.shape[0]
        A_eq = _matrix(A_eq, n, "A_eq")
        A_ub = _matrix(A_ub, n, "A_ub")
        b_eq = _vector(b_eq, A_eq.shape[0], "b_eq")
        b_ub = _vector(b_ub, A_ub.shape[0], "b_ub")
        for name, arr in (("objective", c), ("A_eq", A_eq), ("b_eq", b_eq), ("A_ub", A_ub), ("b_ub", b_ub)):
            arr = arr.copy()
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)

    @property
    def n_vars(self) -> int:
        return self.objective.shape[0]

    def negated(self) -> "LinearProgram":
        return LinearProgram(-self.objective, self.A_eq, self.b_eq, self.A_ub, self.b_ub)

    def max_violation(self, x: np.ndarray) -> float:
        """Largest constraint residual at ``x`` (0 when feasible)."""
        x = np.asarray(x, dtype=float)
        worst = max(0.0, float(-x.min())) if x.size else 0.0
        if self.A_eq.shape[0]:
            worst = max(worst, float(np.max(np.abs(self.A_eq @ x - self.b_eq))))
        if self.A_ub.shape[0]:
            worst = max(worst, float(np.max(self.A_ub @ x - self.b_ub)))
        return worst


@dataclass(frozen=True)
class LpSolution:
    status: str
    value: Optional[float] = None
    witness: Optional[np.ndarray] = None

    @property
    def optimal(self) -> bool:
        return self.status == OPTIMAL


def _standard_form(lp: LinearProgram):
    """Return (A, b, c, n_orig) with slacks appended and b >= 0."""
    n = lp.n_vars
    m_ub = lp.A_ub.shape[0]
    A = np.zeros((lp.A_eq.shape[0] + m_ub, n + m_ub))
    A[: lp.A_eq.shape[0], :n] = lp.A_eq
    A[lp.A_eq.shape[0]:, :n] = lp.A_ub
    A[lp.A_eq.shape[0]:, n:] = np.eye(m_ub)
    b = np.concatenate([lp.b_eq, lp.b_ub])
    c = np.concatenate([lp.objective, np.zeros(m_ub)])
    neg = b < 0
    A[neg] *= -1
    b = np.where(neg, -b, b)
    return A, b, c, n


def _pivot(T: np.ndarray, basis: list[int], row: int, col: int) -> None:
    T[row] /= T[row, col]
    for r in range(T.shape[0]):
        if r != row and T[r, col] != 0.0:
            T[r] -= T[r, col] * T[row]
    basis[row] = col


def _run(T: np.ndarray, basis: list[int], allowed: int) -> str:
    """Minimize the objective held in the last row of ``T`` (Bland's rule).

    Columns ``>= allowed`` never enter the basis.
    """
    m = T.shape[0] - 1
    while True:
        reduced = T[-1, :allowed]
        entering = next((j for j in range(allowed) if reduced[j] < -PIVOT_TOL), None)
        if entering is None:
            return OPTIMAL
        col = T[:m, entering]
        best_ratio, leaving = math.inf, None
        for i in range(m):
            if col[i] > PIVOT_TOL:
                ratio = T[i, -1] / col[i]
                if ratio < best_ratio - PIVOT_TOL or (
                    abs(ratio - best_ratio) <= PIVOT_TOL and basis[i] < basis[leaving]
                ):
                    best_ratio, leaving = ratio, i
        if leaving is None:
            return UNBOUNDED
        _pivot(T, basis, leaving, entering)


def solve_min(lp: LinearProgram) -> LpSolution:
    """Two-phase simplex minimum of ``lp``; deterministic lowest-index tie-breaking."""
    A, b, c, n_orig = _standard_form(lp)
    m, n = A.shape
    if m == 0:
        if np.any(c < -PIVOT_TOL):
            return LpSolution(UNBOUNDED)
        return LpSolution(OPTIMAL, 0.0, np.zeros(n_orig))

    # phase 1: artificials in columns n..n+m-1
    T = np.zeros((m + 1, n + m + 1))
    T[:m, :n] = A
    T[:m, n:n + m] = np.eye(m)
    T[:m, -1] = b
    T[-1, :n] = -A.sum(axis=0)
    T[-1, -1] = -b.sum()
    basis = list(range(n, n + m))
    _run(T, basis, n)
    if -T[-1, -1] > FEAS_TOL:
        return LpSolution(INFEASIBLE)

    # drive artificials out of the basis; rows that cannot be are redundant
    keep = []
    for i in range(m):
        if basis[i] >= n:
            j = next((j for j in range(n) if abs(T[i, j]) > PIVOT_TOL), None)
            if j is None:
                continue
            _pivot(T, basis, i, j)
        keep.append(i)
    T = np.vstack([T[keep][:, list(range(n)) + [n + m]], np.zeros((1, n + 1))])
    basis = [basis[i] for i in keep]

    # phase 2
    T[-1, :n] = c
    for i, j in enumerate(basis):
        T[-1] -= c[j] * T[i]
    status = _run(T, basis, n)
    if status == UNBOUNDED:
        return LpSolution(UNBOUNDED)
    x = np.zeros(n)
    for i, j in enumerate(basis):
        x[j] = T[i, -1]
    x = np.where(np.abs(x) < PIVOT_TOL, 0.0, x)
    witness = x[:n_orig]
    return LpSolution(OPTIMAL, float(lp.objective @ witness), witness)


def solve_max(lp: LinearProgram) -> LpSolution:
    sol = solve_min(lp.negated())
    if not sol.optimal:
        return sol
    return LpSolution(OPTIMAL, float(lp.objective @ sol.witness), sol.witness)


def _independent_rows(A: np.ndarray, b: np.ndarray):
    """Greedy maximal set of linearly independent rows of ``[A]``."""
    rows = []
    for i in range(A.shape[0]):
        cand = rows + [i]
        if np.linalg.matrix_rank(A[cand], tol=1e-9) == len(cand):
            rows = cand
    return A[rows], b[rows]


def vertex_oracle(lp: LinearProgram, sense: str = "min", max_bases: int = MAX_BASES) -> LpSolution:
    """Brute-force optimum over every basic feasible solution.

    Shares no code with :func:`solve_min`; intended as an independent check.
    Only valid for problems with a bounded feasible set or a finite optimum.
    """
    if sense not in ("min", "max"):
        raise ValueError(f"sense must be 'min' or 'max', got {sense!r}")
    A_full, b_full, c, n_orig = _standard_form(lp)
    A, b = _independent_rows(A_full, b_full)
    m, n = A.shape
    if m == 0:
        x = np.zeros(n)
        return LpSolution(OPTIMAL, 0.0, x[:n_orig]) if lp.max_violation(x[:n_orig]) <= FEAS_TOL else LpSolution(INFEASIBLE)
    n_bases = math.comb(n, m)
    if n_bases > max_bases:
        raise LPSizeError(f"{n_bases} candidate bases exceed the limit of {max_bases}")

    combos = np.array(list(itertools.combinations(range(n), m)), dtype=np.intp)
    sub = A[:, combos].transpose(1, 0, 2)  # (k, m, m)
    dets = np.linalg.det(sub)
    ok = np.abs(dets) > 1e-9
    combos, sub = combos[ok], sub[ok]
    if combos.shape[0] == 0:
        return LpSolution(INFEASIBLE)
    xb = np.linalg.solve(sub, np.broadcast_to(b, (sub.shape[0], m))[..., None])[..., 0]
    X = np.zeros((combos.shape[0], n))
    np.put_along_axis(X, combos, xb, axis=1)
    resid = np.max(np.abs(X @ A_full.T - b_full), axis=1) if A_full.shape[0] else np.zeros(len(X))
    feasible = (X.min(axis=1) >= -FEAS_TOL) & (resid <= FEAS_TOL)
    if not np.any(feasible):
        return LpSolution(INFEASIBLE)
    X = X[feasible]
    values = X @ c
    idx = int(np.argmin(values) if sense == "min" else np.argmax(values))
    witness = np.clip(X[idx, :n_orig], 0.0, None)
    return LpSolution(OPTIMAL, float(values[idx]), witness)
