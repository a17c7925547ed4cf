"""LP-relaxation backend.

The branch-and-cut engine only needs an object that can hold a linear
objective, accumulate rows, and return proven-optimal basic solutions for
feasible LPs.  This module provides that contract on top of
``scipy.optimize.linprog`` (HiGHS).  Re-solving an unchanged LP reproduces
the objective within ``LP_REPRO_TOL``.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np
from scipy import sparse
from scipy.optimize import linprog

LE, GE, EQ = "<=", ">=", "=="


@dataclass(frozen=True)
class Row:
    """Sparse linear row: sum(coef[t] * x[idx[t]]) <sense> rhs."""

    idx: tuple[int, ...]
    coef: tuple[float, ...]
    sense: str
    rhs: float
    name: str = ""

    def __post_init__(self):
        if self.sense not in (LE, GE, EQ):
            raise ValueError(f"bad sense {self.sense!r}")
        if len(self.idx) != len(self.coef):
            raise ValueError("idx/coef length mismatch")

    def activity(self, x: np.ndarray) -> float:
        return float(sum(c * x[i] for i, c in zip(self.idx, self.coef)))

    def violation(self, x: np.ndarray) -> float:
        """Positive amount by which ``x`` violates the row (0 if satisfied)."""
        act = self.activity(x)
        if self.sense == LE:
            return max(0.0, act - self.rhs)
        if self.sense == GE:
            return max(0.0, self.rhs - act)
        return abs(act - self.rhs)


@dataclass(frozen=True)
class LpResult:
    status: str  # 'optimal' | 'infeasible' | 'error'
    objective: Optional[float]
    x: Optional[np.ndarray]


class BackendError(RuntimeError):
    """LP backend failed to return a usable answer."""


class ScipyLpBackend:
    """Maximizing LP over box-bounded variables with accumulated rows."""

    def __init__(self, objective: np.ndarray, lb: np.ndarray, ub: np.ndarray):
        self.obj = np.asarray(objective, dtype=float)
        self.lb = np.asarray(lb, dtype=float).copy()
        self.ub = np.asarray(ub, dtype=float).copy()
        self.nvar = len(self.obj)
        self._rows: list[Row] = []
        self._cache = None  # (A_ub, b_ub, A_eq, b_eq)

    @property
    def rows(self) -> Sequence[Row]:
        return tuple(self._rows)

    def add_rows(self, rows: Sequence[Row]) -> None:
        self._rows.extend(rows)
        self._cache = None

    def set_bounds(self, idx: int, lb: float, ub: float) -> None:
        self.lb[idx] = lb
        self.ub[idx] = ub

    def _matrices(self):
        if self._cache is None:
            ub_data, ub_i, ub_j, ub_rhs = [], [], [], []
            eq_data, eq_i, eq_j, eq_rhs = [], [], [], []
            for row in self._rows:
                flip = -1.0 if row.sense == GE else 1.0
                if row.sense == EQ:
                    r = len(eq_rhs)
                    eq_rhs.append(row.rhs)
                    eq_i.extend([r] * len(row.idx))
                    eq_j.extend(row.idx)
                    eq_data.extend(row.coef)
                else:
                    r = len(ub_rhs)
                    ub_rhs.append(flip * row.rhs)
                    ub_i.extend([r] * len(row.idx))
                    ub_j.extend(row.idx)
                    ub_data.extend(flip * c for c in row.coef)
            A_ub = b_ub = A_eq = b_eq = None
            if ub_rhs:
                A_ub = sparse.csr_matrix(
                    (ub_data, (ub_i, ub_j)), shape=(len(ub_rhs), self.nvar))
                b_ub = np.asarray(ub_rhs)
            if eq_rhs:
                A_eq = sparse.csr_matrix(
                    (eq_data, (eq_i, eq_j)), shape=(len(eq_rhs), self.nvar))
                b_eq = np.asarray(eq_rhs)
            self._cache = (A_ub, b_ub, A_eq, b_eq)
        return self._cache

    def solve(self, bound_overrides: Optional[dict[int, tuple[float, float]]] = None
              ) -> LpResult:
        A_ub, b_ub, A_eq, b_eq = self._matrices()
        lb, ub = self.lb, self.ub
        if bound_overrides:
            lb = lb.copy()
            ub = ub.copy()
            for i, (lo, hi) in bound_overrides.items():
                lb[i], ub[i] = lo, hi
        res = linprog(-self.obj, A_ub=A_ub, b_ub=b_ub, A_eq=A_eq, b_eq=b_eq,
                      bounds=np.column_stack((lb, ub)), method="highs")
        if res.status == 0:
            return LpResult("optimal", -float(res.fun), np.asarray(res.x))
        if res.status == 2:
            return LpResult("infeasible", None, None)
        raise BackendError(f"LP solve failed with status {res.status}: "
                           f"{res.message}")
