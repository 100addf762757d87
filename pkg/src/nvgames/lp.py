"""Dense linear-program solver returning vertex (basic feasible) solutions.

Two-phase revised simplex with an explicitly maintained basis inverse.
Dantzig pricing by default; after 2*(m+n) consecutive degenerate pivots the
solver permanently switches to Bland's rule for the remainder of the solve,
which guarantees termination. Free variables are handled internally by
splitting, finite lower bounds by shifting.

`solve_lp` optionally accepts a starting basis (column ids of the internal
standard form, as reported in ``LpSolution.basis``). A usable starting basis
skips phase 1 entirely, which is what makes repeated solves over one
polytope with changing objectives cheap.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Sequence

import numpy as np

from .errors import InputError, SolverError

# Tolerances: instance magnitudes are O(1)-O(1e2) by construction.
PIVOT_TOL = 1e-10
FEAS_TOL = 1e-8
OPT_TOL = 1e-9

_REFACTOR_EVERY = 100
_MAX_PIVOTS = 500_000


def _as_matrix(a, n_cols: int, name: str) -> np.ndarray:
    if a is None:
        return np.zeros((0, n_cols))
    a = np.asarray(a, dtype=float)
    if a.ndim != 2:
        raise InputError(f"{name} must be a 2-d matrix, got ndim={a.ndim}")
    if a.shape[1] != n_cols:
        raise InputError(
            f"{name} has {a.shape[1]} columns, expected {n_cols} (objective length)"
        )
    return a


def _as_vector(b, m: int, name: str) -> np.ndarray:
    if b is None:
        b = np.zeros(0)
    b = np.atleast_1d(np.asarray(b, dtype=float))
    if b.shape != (m,):
        raise InputError(f"{name} has shape {b.shape}, expected ({m},)")
    if not np.all(np.isfinite(b)):
        raise InputError(f"{name} must be finite")
    return b


@dataclass(frozen=True, eq=False)
class LinearProgram:
    """min/max objective @ x  s.t.  a_eq @ x = b_eq, a_ub @ x <= b_ub, x >= lower_bounds.

    ``lower_bounds`` defaults to 0 for every variable; use ``-np.inf`` to mark
    a variable as free. Matrices are held by reference and never mutated.
    """

    sense: str
    objective: np.ndarray
    a_eq: np.ndarray | None = None
    b_eq: np.ndarray | None = None
    a_ub: np.ndarray | None = None
    b_ub: np.ndarray | None = None
    lower_bounds: np.ndarray | None = None

    def __post_init__(self):
        if self.sense not in ("min", "max"):
            raise InputError(f"sense must be 'min' or 'max', got {self.sense!r}")
        c = np.atleast_1d(np.asarray(self.objective, dtype=float))
        if c.ndim != 1 or c.size == 0:
            raise InputError("objective must be a nonempty 1-d vector")
        if not np.all(np.isfinite(c)):
            raise InputError("objective must be finite")
        object.__setattr__(self, "objective", c)
        n = c.size
        a_eq = _as_matrix(self.a_eq, n, "a_eq")
        a_ub = _as_matrix(self.a_ub, n, "a_ub")
        object.__setattr__(self, "a_eq", a_eq)
        object.__setattr__(self, "a_ub", a_ub)
        object.__setattr__(self, "b_eq", _as_vector(self.b_eq, a_eq.shape[0], "b_eq"))
        object.__setattr__(self, "b_ub", _as_vector(self.b_ub, a_ub.shape[0], "b_ub"))
        if self.lower_bounds is None:
            lb = np.zeros(n)
        else:
            lb = np.atleast_1d(np.asarray(self.lower_bounds, dtype=float))
            if lb.shape != (n,):
                raise InputError(f"lower_bounds has shape {lb.shape}, expected ({n},)")
            if np.any(np.isposinf(lb)) or np.any(np.isnan(lb)):
                raise InputError("lower_bounds must be finite or -inf")
        object.__setattr__(self, "lower_bounds", lb)

    @property
    def n_vars(self) -> int:
        return self.objective.size

    def with_objective(self, objective) -> "LinearProgram":
        """Same constraints (shared by reference), new objective vector."""
        return replace(self, objective=np.asarray(objective, dtype=float))


@dataclass(frozen=True)
class LpSolution:
    """Solver result. ``basis`` lists internal standard-form column ids:
    0..n-1 original variables, n..n+f-1 negative parts of free variables
    (in increasing variable order), then one slack per ub row."""

    status: str
    x: np.ndarray | None = None
    objective_value: float | None = None
    basis: tuple[int, ...] | None = None
    iterations: int = 0


class _Standardized:
    """Internal standard form: min c @ z, A z = b, z >= 0."""

    __slots__ = ("a", "b", "c", "n_orig", "free_idx", "n_split", "n_slack", "shift")

    def __init__(self, lp: LinearProgram):
        n = lp.n_vars
        lb = lp.lower_bounds
        free = ~np.isfinite(lb)
        self.free_idx = np.flatnonzero(free)
        self.n_orig = n
        self.n_split = self.free_idx.size
        self.n_slack = lp.a_ub.shape[0]

        shift = np.where(free, 0.0, lb)
        self.shift = shift

        m_eq, m_ub = lp.a_eq.shape[0], lp.a_ub.shape[0]
        if m_ub == 0:
            rows = lp.a_eq
            rhs = lp.b_eq
        elif m_eq == 0:
            rows = lp.a_ub
            rhs = lp.b_ub
        else:
            rows = np.vstack([lp.a_eq, lp.a_ub])
            rhs = np.concatenate([lp.b_eq, lp.b_ub])
        if np.any(shift) and rows.shape[0]:
            rhs = rhs - rows @ shift

        extra = []
        if self.n_split:
            extra.append(-rows[:, self.free_idx])
        if self.n_slack:
            slack_block = np.zeros((rows.shape[0], self.n_slack))
            slack_block[m_eq + np.arange(self.n_slack), np.arange(self.n_slack)] = 1.0
            extra.append(slack_block)
        self.a = np.hstack([rows] + extra) if extra else rows
        self.b = np.asarray(rhs, dtype=float)

        c = lp.objective if lp.sense == "min" else -lp.objective
        self.c = np.concatenate([
            c,
            -c[self.free_idx] if self.n_split else np.zeros(0),
            np.zeros(self.n_slack),
        ])

    def recover_x(self, z: np.ndarray) -> np.ndarray:
        x = z[: self.n_orig].copy()
        if self.n_split:
            x[self.free_idx] -= z[self.n_orig : self.n_orig + self.n_split]
        return x + self.shift


class _Simplex:
    """Revised simplex on min c@z, A z = b, z >= 0 (b made nonnegative here).

    Artificial columns are implicit unit vectors with ids >= n; they never
    reenter the basis and are pivoted out (or their redundant rows dropped)
    before phase 2, so a returned basis only contains real columns.
    """

    def __init__(self, a: np.ndarray, b: np.ndarray, c: np.ndarray):
        self.a = a
        self.b = np.array(b, dtype=float, copy=True)
        self.c = c
        neg = self.b < 0
        if np.any(neg):
            # Never mutate the caller's matrix: copy once, flip rows.
            self.a = self.a.copy()
            self.a[neg] *= -1.0
            self.b[neg] *= -1.0
        self.m, self.n = self.a.shape
        self.basis = np.empty(0, dtype=np.int64)
        self.b_inv = np.eye(self.m)
        self.x_b = np.zeros(self.m)
        self.iterations = 0
        self._phase = 2
        self._bland = False
        self._degen_run = 0
        self._since_refactor = 0

    # -- basis linear algebra -------------------------------------------------

    def _col(self, j: int) -> np.ndarray:
        if j < self.n:
            return self.a[:, j]
        e = np.zeros(self.m)
        e[j - self.n] = 1.0
        return e

    def refactor(self) -> bool:
        bm = np.empty((self.m, self.m))
        for i, j in enumerate(self.basis):
            bm[:, i] = self._col(int(j))
        try:
            self.b_inv = np.linalg.inv(bm)
        except np.linalg.LinAlgError:
            return False
        if not np.all(np.isfinite(self.b_inv)):
            return False
        self.x_b = self.b_inv @ self.b
        self._since_refactor = 0
        return True

    def set_basis(self, basis: np.ndarray) -> bool:
        self.basis = np.asarray(basis, dtype=np.int64).copy()
        return self.refactor()

    def _pivot(self, row: int, j_enter: int, d: np.ndarray, step: float) -> None:
        self.x_b -= step * d
        self.x_b[row] = step
        piv_row = self.b_inv[row] / d[row]
        self.b_inv -= np.outer(d, piv_row)
        self.b_inv[row] = piv_row
        self.basis[row] = j_enter
        self.iterations += 1
        self._since_refactor += 1
        if self._since_refactor >= _REFACTOR_EVERY:
            if not self.refactor():
                raise SolverError("basis refactorization failed")
        if step <= PIVOT_TOL:
            self._degen_run += 1
            if self._degen_run > 2 * (self.m + self.n):
                self._bland = True
        else:
            self._degen_run = 0

    # -- simplex iterations ---------------------------------------------------

    def _basic_cost(self, c_work: np.ndarray) -> np.ndarray:
        # Implicit artificials (ids >= n) cost 1 in phase 1, 0 otherwise.
        cb = np.zeros(self.m)
        real = self.basis < self.n
        cb[real] = c_work[self.basis[real]]
        if self._phase == 1:
            cb[~real] = 1.0
        return cb

    def _ratio_test(self, d: np.ndarray) -> int:
        ok = d > PIVOT_TOL
        if not np.any(ok):
            return -1
        ratios = np.where(ok, np.maximum(self.x_b, 0.0) / np.where(ok, d, 1.0), np.inf)
        best = np.min(ratios)
        ties = np.flatnonzero(ratios <= best + PIVOT_TOL)
        if self._bland:
            return int(ties[np.argmin(self.basis[ties])])
        return int(ties[np.argmax(d[ties])])

    def _run(self, c_work: np.ndarray) -> str:
        """Minimize c_work from the current feasible basis."""
        n = self.n
        while True:
            if self.iterations > _MAX_PIVOTS:
                raise SolverError("pivot limit exceeded")
            cb = self._basic_cost(c_work)
            y = cb @ self.b_inv
            r = c_work - y @ self.a
            r[self.basis[self.basis < n]] = np.inf  # basics must not reenter
            if self._bland:
                improving = np.flatnonzero(r < -OPT_TOL)
                if improving.size == 0:
                    return "optimal"
                j = int(improving[0])
            else:
                j = int(np.argmin(r))
                if r[j] >= -OPT_TOL:
                    return "optimal"
            d = self.b_inv @ self.a[:, j]
            row = self._ratio_test(d)
            if row < 0:
                return "unbounded"
            step = max(self.x_b[row] / d[row], 0.0)
            self._pivot(row, j, d, step)

    def solve(self, start_basis: Sequence[int] | None = None) -> str:
        m, n = self.m, self.n
        if m == 0:
            self._phase = 2
            return self._run(self.c)

        started = False
        if start_basis is not None and len(start_basis) == m:
            sb = np.asarray(start_basis, dtype=np.int64)
            if np.all(sb >= 0) and np.all(sb < n) and np.unique(sb).size == m:
                if self.set_basis(sb) and self.x_b.size and np.min(self.x_b) >= -FEAS_TOL:
                    np.maximum(self.x_b, 0.0, out=self.x_b)
                    started = True
        if not started:
            self._phase = 1
            self.basis = np.arange(n, n + m, dtype=np.int64)
            self.b_inv = np.eye(m)
            self.x_b = self.b.copy()
            self._bland = False
            self._degen_run = 0
            status = self._run(np.zeros(n))
            if status != "optimal":
                raise SolverError(f"phase 1 ended with status {status!r}")
            if float(np.sum(self.x_b[self.basis >= n])) > FEAS_TOL:
                return "infeasible"
            self._evict_artificials()

        self._phase = 2
        self._bland = False
        self._degen_run = 0
        status = self._run(self.c)
        if status != "optimal":
            return status
        # Guard against drift: refactor once and re-verify optimality.
        if self._since_refactor > 0:
            if not self.refactor():
                raise SolverError("final refactorization failed")
            status = self._run(self.c)
        return status

    def _evict_artificials(self) -> None:
        """Pivot zero-level artificials out; drop genuinely redundant rows."""
        art_rows = [i for i in range(self.m) if self.basis[i] >= self.n]
        if not art_rows:
            return
        in_basis = np.zeros(self.n, dtype=bool)
        in_basis[self.basis[self.basis < self.n]] = True
        drop = []
        for i in art_rows:
            tableau_row = self.b_inv[i] @ self.a
            tableau_row[in_basis] = 0.0
            j = int(np.argmax(np.abs(tableau_row)))
            if abs(tableau_row[j]) > PIVOT_TOL:
                d = self.b_inv @ self.a[:, j]
                self._pivot(i, j, d, 0.0)
                in_basis[j] = True
            else:
                drop.append(i)
        if drop:
            keep = np.setdiff1d(np.arange(self.m), np.array(drop, dtype=int))
            self.a = self.a[keep]
            self.b = self.b[keep]
            self.basis = self.basis[keep]
            self.m = keep.size
            if not self.refactor():
                raise SolverError("refactorization failed after dropping redundant rows")


def solve_lp(lp: LinearProgram, start_basis: Sequence[int] | None = None) -> LpSolution:
    """Solve `lp` and return a vertex solution.

    `start_basis`: internal column ids from a previous solve of the same
    constraint system (only the objective may differ). An unusable basis
    silently falls back to a cold two-phase start.
    """
    std = _Standardized(lp)
    sx = _Simplex(std.a, std.b, std.c)
    status = sx.solve(start_basis)
    if status != "optimal":
        return LpSolution(status=status, iterations=sx.iterations)

    z = np.zeros(std.a.shape[1])
    z[sx.basis] = np.maximum(sx.x_b, 0.0)
    x = std.recover_x(z)
    obj = float(lp.objective @ x)
    _check_solution(lp, x)
    return LpSolution(
        status="optimal",
        x=x,
        objective_value=obj,
        basis=tuple(int(j) for j in sx.basis),
        iterations=sx.iterations,
    )


def _check_solution(lp: LinearProgram, x: np.ndarray) -> None:
    """Raise SolverError if the claimed optimum is not tolerance-feasible."""
    if lp.a_eq.shape[0]:
        res = np.max(np.abs(lp.a_eq @ x - lp.b_eq))
        if res > 100 * FEAS_TOL:
            raise SolverError(f"equality residual {res:.3e} exceeds tolerance")
    if lp.a_ub.shape[0]:
        res = np.max(lp.a_ub @ x - lp.b_ub)
        if res > 100 * FEAS_TOL:
            raise SolverError(f"inequality violation {res:.3e} exceeds tolerance")
    lb = lp.lower_bounds
    finite = np.isfinite(lb)
    if np.any(finite):
        res = np.max(lb[finite] - x[finite])
        if res > 100 * FEAS_TOL:
            raise SolverError(f"bound violation {res:.3e} exceeds tolerance")
