"""Sparse linear-program container and solve wrapper.

Problems are assembled additively (variables and rows are append-only) so
model builders can compose blocks; `solve_lp` hands the assembled problem
to HiGHS through scipy and re-validates the returned point against the
feasibility tolerances below.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy import sparse
from scipy.optimize import linprog

# Feasibility / optimality tolerances shared by all downstream models.
FEAS_TOL = 1e-7
OPT_TOL = 1e-8
# Relative tolerance for equality-of-objective tests across modules.
REL_TOL = 1e-6


class LpError(Exception):
    """Malformed problem or unexpected solver failure."""


@dataclass
class LpSolution:
    status: str  # "optimal" | "infeasible" | "unbounded"
    x: Optional[np.ndarray]
    objective: Optional[float]

    @property
    def is_optimal(self) -> bool:
        return self.status == "optimal"


def _as_float_array(a, n=None) -> np.ndarray:
    arr = np.atleast_1d(np.asarray(a, dtype=float))
    if n is not None and arr.size == 1 and n != 1:
        arr = np.full(n, arr[0])
    return arr


class LpProblem:
    """min c.x  s.t.  A_eq x = b_eq,  A_ub x <= b_ub,  lb <= x <= ub."""

    def __init__(self):
        self._cost: list[np.ndarray] = []
        self._lb: list[np.ndarray] = []
        self._ub: list[np.ndarray] = []
        self._extra_cost_cols: list[np.ndarray] = []
        self._extra_cost_vals: list[np.ndarray] = []
        self._eq_rows: list[np.ndarray] = []
        self._eq_cols: list[np.ndarray] = []
        self._eq_vals: list[np.ndarray] = []
        self._eq_rhs: list[np.ndarray] = []
        self._ub_rows: list[np.ndarray] = []
        self._ub_cols: list[np.ndarray] = []
        self._ub_vals: list[np.ndarray] = []
        self._ub_rhs: list[np.ndarray] = []
        self.n_vars = 0
        self.n_eq = 0
        self.n_ineq = 0

    # -- variables ---------------------------------------------------------

    def add_vars(self, n: int, cost=0.0, lower=0.0, upper=np.inf) -> np.ndarray:
        """Append n variables; returns their column indices."""
        if n < 0:
            raise LpError("negative variable count")
        if n == 0:
            return np.empty(0, dtype=np.int64)
        c = _as_float_array(cost, n)
        lb = _as_float_array(lower, n)
        ub = _as_float_array(upper, n)
        if c.size != n or lb.size != n or ub.size != n:
            raise LpError("cost/bound length mismatch")
        if np.isnan(c).any():
            raise LpError("NaN cost coefficient")
        if np.isnan(lb).any() or np.isnan(ub).any():
            raise LpError("NaN bound")
        if (lb > ub).any():
            raise LpError("lower bound above upper bound")
        idx = np.arange(self.n_vars, self.n_vars + n, dtype=np.int64)
        self._cost.append(c)
        self._lb.append(lb)
        self._ub.append(ub)
        self.n_vars += n
        return idx

    def add_cost(self, cols, vals) -> None:
        """Accumulate extra objective coefficients onto existing variables."""
        cols = np.asarray(cols, dtype=np.int64)
        vals = _as_float_array(vals, cols.size)
        self._check_cols(cols)
        if np.isnan(vals).any():
            raise LpError("NaN cost coefficient")
        self._extra_cost_cols.append(cols)
        self._extra_cost_vals.append(vals)

    # -- rows --------------------------------------------------------------

    def _check_cols(self, cols: np.ndarray) -> None:
        if cols.size and (cols.min() < 0 or cols.max() >= self.n_vars):
            raise LpError("constraint references unknown variable index")

    def _append(self, store_rows, store_cols, store_vals, store_rhs,
                rows, cols, vals, rhs, base) -> int:
        rows = np.asarray(rows, dtype=np.int64)
        cols = np.asarray(cols, dtype=np.int64)
        vals = np.asarray(vals, dtype=float)
        rhs = _as_float_array(rhs)
        if not (rows.size == cols.size == vals.size):
            raise LpError("triplet length mismatch")
        self._check_cols(cols)
        if not np.isfinite(vals).all():
            raise LpError("non-finite constraint coefficient")
        if not np.isfinite(rhs).all():
            raise LpError("non-finite right-hand side")
        k = int(rhs.size)
        if rows.size and (rows.min() < 0 or rows.max() >= k):
            raise LpError("row index out of block range")
        store_rows.append(rows + base)
        store_cols.append(cols)
        store_vals.append(vals)
        store_rhs.append(rhs)
        return k

    def add_eq(self, cols, vals, rhs: float) -> None:
        cols = np.asarray(cols, dtype=np.int64)
        self.n_eq += self._append(self._eq_rows, self._eq_cols, self._eq_vals,
                                  self._eq_rhs, np.zeros(cols.size), cols, vals,
                                  rhs, self.n_eq)

    def add_ineq(self, cols, vals, rhs: float) -> None:
        """One row:  sum(vals * x[cols]) <= rhs."""
        cols = np.asarray(cols, dtype=np.int64)
        self.n_ineq += self._append(self._ub_rows, self._ub_cols, self._ub_vals,
                                    self._ub_rhs, np.zeros(cols.size), cols, vals,
                                    rhs, self.n_ineq)

    def add_eq_block(self, rows, cols, vals, rhs) -> None:
        """Bulk rows; `rows` are 0-based indices into this block's rhs."""
        self.n_eq += self._append(self._eq_rows, self._eq_cols, self._eq_vals,
                                  self._eq_rhs, rows, cols, vals, rhs, self.n_eq)

    def add_ineq_block(self, rows, cols, vals, rhs) -> None:
        self.n_ineq += self._append(self._ub_rows, self._ub_cols, self._ub_vals,
                                    self._ub_rhs, rows, cols, vals, rhs, self.n_ineq)

    # -- assembly ----------------------------------------------------------

    def arrays(self):
        c = np.concatenate(self._cost) if self._cost else np.empty(0)
        if self._extra_cost_cols:
            cols = np.concatenate(self._extra_cost_cols)
            vals = np.concatenate(self._extra_cost_vals)
            np.add.at(c, cols, vals)
        lb = np.concatenate(self._lb) if self._lb else np.empty(0)
        ub = np.concatenate(self._ub) if self._ub else np.empty(0)

        def mat(rows, cols, vals, n_rows):
            if not rows:
                return None
            return sparse.csr_matrix(
                (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
                shape=(n_rows, self.n_vars))

        a_eq = mat(self._eq_rows, self._eq_cols, self._eq_vals, self.n_eq)
        b_eq = np.concatenate(self._eq_rhs) if self._eq_rhs else None
        a_ub = mat(self._ub_rows, self._ub_cols, self._ub_vals, self.n_ineq)
        b_ub = np.concatenate(self._ub_rhs) if self._ub_rhs else None
        return c, a_eq, b_eq, a_ub, b_ub, lb, ub


# Above this size interior-point (with crossover) beats dual simplex on the
# multi-scenario block LPs; below it simplex setup costs less.
_IPM_THRESHOLD = 4000


def solve_lp(problem: LpProblem) -> LpSolution:
    """Solve to optimality or return a correct infeasible/unbounded verdict."""
    if problem.n_vars == 0:
        return LpSolution("optimal", np.empty(0), 0.0)
    c, a_eq, b_eq, a_ub, b_ub, lb, ub = problem.arrays()
    method = "highs-ipm" if problem.n_vars > _IPM_THRESHOLD else "highs"
    options = {"primal_feasibility_tolerance": OPT_TOL,
               "dual_feasibility_tolerance": OPT_TOL}
    if method == "highs-ipm":
        options["ipm_optimality_tolerance"] = 1e-7
    res = linprog(
        c, A_ub=a_ub, b_ub=b_ub, A_eq=a_eq, b_eq=b_eq,
        bounds=np.column_stack([lb, ub]), method=method, options=options)
    if res.status == 2:
        return LpSolution("infeasible", None, None)
    if res.status == 3:
        return LpSolution("unbounded", None, None)
    if res.status != 0:
        raise LpError(f"solver failed: {res.message}")
    x = np.clip(res.x, lb, ub)
    _validate(x, a_eq, b_eq, a_ub, b_ub)
    return LpSolution("optimal", x, float(c @ x))


def _validate(x, a_eq, b_eq, a_ub, b_ub) -> None:
    if a_eq is not None:
        scale = 1.0 + np.abs(b_eq).max(initial=0.0)
        resid = np.abs(a_eq @ x - b_eq).max(initial=0.0)
        if resid > FEAS_TOL * scale:
            raise LpError(f"equality residual {resid:.3e} exceeds tolerance")
    if a_ub is not None:
        viol = (a_ub @ x - b_ub).max(initial=0.0)
        if viol > FEAS_TOL * (1.0 + np.abs(b_ub).max(initial=0.0)):
            raise LpError(f"inequality violation {viol:.3e} exceeds tolerance")
