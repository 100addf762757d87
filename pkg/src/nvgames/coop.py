"""Deterministic cooperative-game solution concepts: characteristic
functions over all coalitions, core membership, the least core, and the
LP-duality balancedness check for worst-case ratio tables.

Coalitions are bitmasks (bit i = player i); LP rows are always emitted in
increasing mask order so bases are reproducible.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping

import numpy as np

from .distributions import Coalition, Instance, JointDistribution, coalition_mask
from .errors import InputError, SolverError
from .lp import LinearProgram, solve_lp
from .newsvendor import optimal_order

MEMBERSHIP_TOL = 1e-7


@dataclass(frozen=True, eq=False)
class CharacteristicFunction:
    """Values v(S) for every coalition of n players, indexed by bitmask;
    v(empty) = 0."""

    n: int
    values: np.ndarray

    def __post_init__(self):
        if self.n < 1:
            raise InputError(f"player count must be >= 1, got {self.n}")
        values = np.asarray(self.values, dtype=float)
        if values.shape != (1 << self.n,):
            raise InputError(
                f"values must cover all {1 << self.n} coalitions, got shape {values.shape}"
            )
        if values[0] != 0.0:
            raise InputError(f"v(empty) must be 0, got {values[0]}")
        object.__setattr__(self, "values", values)

    def __call__(self, s) -> float:
        return float(self.values[coalition_mask(s, self.n)])

    @property
    def grand_value(self) -> float:
        return float(self.values[-1])


def build_deterministic_game(inst: Instance, q: JointDistribution) -> CharacteristicFunction:
    """Characteristic function v(S) = optimal expected profit of S under the
    (fully known) joint distribution q."""
    n = inst.n_retailers
    values = np.zeros(1 << n)
    for mask in range(1, 1 << n):
        values[mask] = optimal_order(inst, q, mask).value
    return CharacteristicFunction(n, values)


def _coalition_indicator_rows(n: int, masks) -> np.ndarray:
    rows = np.zeros((len(masks), n))
    for i, mask in enumerate(masks):
        for j in range(n):
            if mask >> j & 1:
                rows[i, j] = 1.0
    return rows


def solve_stability_lp(
    n: int, values_by_mask: Mapping[int, float], total: float
) -> tuple[np.ndarray, float]:
    """min eps s.t. x(S) + eps >= value(S) for each given coalition and
    x(N) = total, with x and eps free. Rows are emitted in increasing mask
    order. Returns (x, eps)."""
    masks = sorted(values_by_mask)
    if any(m <= 0 or m >= (1 << n) for m in masks):
        raise InputError("stability constraints must be over nonempty coalitions of 0..n-1")
    if not masks:
        return np.full(n, total / n), 0.0
    rows = _coalition_indicator_rows(n, masks)
    vals = np.array([float(values_by_mask[m]) for m in masks])
    a_ub = -np.hstack([rows, np.ones((len(masks), 1))])
    a_eq = np.concatenate([np.ones(n), [0.0]])[None, :]
    lp = LinearProgram(
        sense="min",
        objective=np.concatenate([np.zeros(n), [1.0]]),
        a_eq=a_eq,
        b_eq=[total],
        a_ub=a_ub,
        b_ub=-vals,
        lower_bounds=np.full(n + 1, -np.inf),
    )
    sol = solve_lp(lp)
    if sol.status != "optimal":
        raise SolverError(f"stability LP reported {sol.status!r}")
    return sol.x[:n].copy(), float(sol.x[n])


def least_core(v: CharacteristicFunction) -> tuple[np.ndarray, float]:
    """Solve min eps s.t. x(S) >= v(S) - eps for every nonempty proper S and
    x(N) = v(N). Returns (allocation, s_value); a nonpositive s_value means
    the core is nonempty."""
    n = v.n
    if n == 1:
        return np.array([v.grand_value]), 0.0
    table = {mask: float(v.values[mask]) for mask in range(1, (1 << n) - 1)}
    x, eps = solve_stability_lp(n, table, v.grand_value)
    return x, eps


def core_membership(v: CharacteristicFunction, x, tol: float = MEMBERSHIP_TOL) -> bool:
    """Efficiency plus stability against every nonempty proper coalition."""
    x = np.asarray(x, dtype=float)
    if x.shape != (v.n,):
        raise InputError(f"allocation has shape {x.shape}, expected ({v.n},)")
    if abs(float(np.sum(x)) - v.grand_value) > tol:
        return False
    for mask in range(1, (1 << v.n) - 1):
        total = sum(x[j] for j in range(v.n) if mask >> j & 1)
        if total < v.values[mask] - tol:
            return False
    return True


def imputation_check(v: CharacteristicFunction, x, tol: float = MEMBERSHIP_TOL) -> bool:
    """Efficiency plus individual rationality."""
    x = np.asarray(x, dtype=float)
    if x.shape != (v.n,):
        raise InputError(f"allocation has shape {x.shape}, expected ({v.n},)")
    if abs(float(np.sum(x)) - v.grand_value) > tol:
        return False
    singles = v.values[[1 << j for j in range(v.n)]]
    return bool(np.all(x >= singles - tol))


def _ratio_table(vmax_table: Mapping, n: int | None) -> tuple[int, list[int], np.ndarray]:
    masks_in = {}
    for key, val in vmax_table.items():
        mask = key.mask if isinstance(key, Coalition) else coalition_mask(key)
        masks_in[mask] = float(val)
    if n is None:
        if not masks_in:
            raise InputError("empty ratio table and no player count given")
        n = max(max(masks_in).bit_length(), 1)
    grand = (1 << n) - 1
    masks = sorted(m for m in masks_in if 0 < m < grand)
    return n, masks, np.array([masks_in[m] for m in masks])


def balancedness_duality_pair(
    vmax_table: Mapping, n: int | None = None
) -> tuple[float, float]:
    """Capped primal/dual optima certifying balancedness of a worst-case
    ratio table.

    The raw dual (weights over coalitions whose per-player totals equal a
    common level p) is a cone, so its optimum is 0 or +inf; normalizing to
    p = 1 makes both sides finite. Returned values are clipped at 0, equal
    to each other by strong duality, and are 0 exactly when some efficient
    allocation satisfies every coalition ratio constraint (nonempty core).
    """
    n, masks, vals = _ratio_table(vmax_table, n)
    if not masks:
        return 0.0, 0.0
    rows = _coalition_indicator_rows(n, masks)

    # Primal side: min x(N) - 1 subject to x(S) >= v(S), x free.
    primal = LinearProgram(
        sense="min",
        objective=np.ones(n),
        a_ub=-rows,
        b_ub=-vals,
        lower_bounds=np.full(n, -np.inf),
    )
    psol = solve_lp(primal)
    if psol.status != "optimal":
        raise SolverError(f"balancedness primal reported {psol.status!r}")

    # Dual side: max sum_S y_S v(S) - 1 over balanced weight maps
    # (sum over S containing i of y_S = 1 for each player, y >= 0).
    dual = LinearProgram(
        sense="max",
        objective=vals,
        a_eq=rows.T,
        b_eq=np.ones(n),
    )
    dsol = solve_lp(dual)
    if dsol.status != "optimal":
        raise SolverError(f"balancedness dual reported {dsol.status!r}")

    z_p = max(0.0, float(psol.objective_value) - 1.0)
    z_d = max(0.0, float(dsol.objective_value) - 1.0)
    return z_p, z_d


def balancedness_dual_check(vmax_table: Mapping, n: int | None = None) -> float:
    """Optimum of the (normalized) dual balancedness program: 0 certifies a
    balanced table, hence a nonempty set of stable efficient allocations; a
    positive value is an unbalancedness certificate."""
    _z_p, z_d = balancedness_duality_pair(vmax_table, n)
    return z_d
