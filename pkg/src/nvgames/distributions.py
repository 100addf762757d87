"""Instances, the class of joint demand distributions with fixed block
marginals (a polytope of probability vectors), and generators for
independent, extremal, and contaminated joints.

Index convention: the joint support is the product of the block supports in
lexicographic order with the **last block fastest**, i.e. joint atom ``k``
corresponds to ``np.unravel_index(k, (K_1, ..., K_R))``. Fixing the order
keeps files and tests byte-stable.

Duplicate atoms inside a marginal are permitted; consistency constraints are
formed per distinct atom value with probabilities added.
"""

from __future__ import annotations

import json
import weakref
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .errors import CapacityError, InputError, SolverError
from .lp import LinearProgram, solve_lp

DEFAULT_SUPPORT_CAP = 10**6

CONSISTENCY_TOL = 1e-9


# ---------------------------------------------------------------------------
# Core data types
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class DiscreteMarginal:
    """Discrete distribution of one block's demand sub-vector.

    atoms: (K_r, dim) nonnegative demand values; probs: (K_r,) summing to 1.
    """

    atoms: np.ndarray
    probs: np.ndarray

    def __post_init__(self):
        atoms = np.atleast_2d(np.asarray(self.atoms, dtype=float))
        probs = np.atleast_1d(np.asarray(self.probs, dtype=float))
        if atoms.ndim != 2:
            raise InputError("atoms must be a (K, dim) matrix")
        if probs.ndim != 1 or probs.size != atoms.shape[0]:
            raise InputError(
                f"probs has length {probs.size}, expected {atoms.shape[0]} (one per atom)"
            )
        if not np.all(np.isfinite(atoms)) or np.any(atoms < 0):
            raise InputError("atoms must be finite and nonnegative")
        if np.any(probs < 0):
            raise InputError("probs must be nonnegative")
        if abs(float(np.sum(probs)) - 1.0) > 1e-12:
            raise InputError(f"probs sum to {float(np.sum(probs))!r}, expected 1 within 1e-12")
        object.__setattr__(self, "atoms", atoms)
        object.__setattr__(self, "probs", probs)

    @property
    def n_atoms(self) -> int:
        return self.atoms.shape[0]

    @property
    def dim(self) -> int:
        return self.atoms.shape[1]


@dataclass(frozen=True, eq=False)
class Instance:
    """A newsvendor market: common price/cost, a partition of the retailers
    into blocks, and one known multivariate marginal per block."""

    price: float
    cost: float
    partition: tuple[tuple[int, ...], ...]
    marginals: tuple[DiscreteMarginal, ...]

    def __post_init__(self):
        p, c = float(self.price), float(self.cost)
        if not (0.0 < c < p) or not np.isfinite(p):
            raise InputError(f"prices must satisfy 0 < cost < price, got cost={c}, price={p}")
        object.__setattr__(self, "price", p)
        object.__setattr__(self, "cost", c)
        part = tuple(tuple(int(i) for i in block) for block in self.partition)
        if not part or any(len(b) == 0 for b in part):
            raise InputError("partition must contain nonempty blocks")
        flat = [i for block in part for i in block]
        n = len(flat)
        if sorted(flat) != list(range(n)):
            raise InputError(
                "partition blocks must be disjoint and cover retailers 0..N-1, "
                f"got {part}"
            )
        object.__setattr__(self, "partition", part)
        marginals = tuple(self.marginals)
        if len(marginals) != len(part):
            raise InputError(
                f"{len(marginals)} marginals for {len(part)} partition blocks"
            )
        for r, (block, marg) in enumerate(zip(part, marginals)):
            if marg.dim != len(block):
                raise InputError(
                    f"marginals[{r}] has dimension {marg.dim}, block has {len(block)} retailers"
                )
        object.__setattr__(self, "marginals", marginals)

    @property
    def n_retailers(self) -> int:
        return sum(len(b) for b in self.partition)

    @property
    def n_blocks(self) -> int:
        return len(self.partition)

    @property
    def ratio(self) -> float:
        """Critical ratio (price - cost) / price."""
        return (self.price - self.cost) / self.price

    @property
    def block_masks(self) -> tuple[int, ...]:
        return tuple(sum(1 << i for i in block) for block in self.partition)

    @property
    def grand_mask(self) -> int:
        return (1 << self.n_retailers) - 1

    def joint_size(self) -> int:
        k = 1
        for m in self.marginals:
            k *= m.n_atoms
        return k


@dataclass(frozen=True)
class Coalition:
    """Subset of retailers with bitmask semantics (bit i = retailer i)."""

    mask: int

    def __post_init__(self):
        if self.mask < 0:
            raise InputError(f"coalition mask must be nonnegative, got {self.mask}")

    @classmethod
    def from_members(cls, members: Iterable[int]) -> "Coalition":
        return cls(sum(1 << int(i) for i in set(members)))

    @property
    def members(self) -> tuple[int, ...]:
        out, m, i = [], self.mask, 0
        while m:
            if m & 1:
                out.append(i)
            m >>= 1
            i += 1
        return tuple(out)

    @property
    def size(self) -> int:
        return bin(self.mask).count("1")

    def __bool__(self) -> bool:
        return self.mask != 0


def coalition_mask(s, n: int | None = None) -> int:
    """Coerce Coalition | int | iterable of members into a bitmask."""
    if isinstance(s, Coalition):
        mask = s.mask
    elif isinstance(s, (int, np.integer)):
        mask = int(s)
    else:
        mask = Coalition.from_members(s).mask
    if mask < 0:
        raise InputError(f"coalition mask must be nonnegative, got {mask}")
    if n is not None and mask >= (1 << n):
        raise InputError(f"coalition mask {mask} has members outside 0..{n - 1}")
    return mask


@dataclass(frozen=True, eq=False)
class JointDistribution:
    """Probability vector over the product support, in the package-wide
    index convention (last block fastest)."""

    q: np.ndarray

    def __post_init__(self):
        q = np.atleast_1d(np.asarray(self.q, dtype=float))
        if q.ndim != 1:
            raise InputError("q must be a vector")
        if np.any(q < -1e-12):
            raise InputError("q must be nonnegative")
        total = float(np.sum(q))
        if abs(total - 1.0) > 1e-10:
            raise InputError(f"q sums to {total!r}, expected 1 within 1e-10")
        object.__setattr__(self, "q", q)

    @property
    def n_atoms(self) -> int:
        return self.q.size


# ---------------------------------------------------------------------------
# Product support and aggregation
# ---------------------------------------------------------------------------


def _check_cap(inst: Instance, cap: int) -> int:
    k = inst.joint_size()
    if k > cap:
        raise CapacityError(
            f"joint support has {k} atoms, exceeding the cap of {cap}; "
            "refuse to enumerate"
        )
    return k


def product_support(
    inst: Instance, cap: int = DEFAULT_SUPPORT_CAP
) -> list[tuple[np.ndarray, tuple[int, ...]]]:
    """All joint demand atoms as (length-N demand vector, block index tuple),
    ordered by the package index convention."""
    k = _check_cap(inst, cap)
    dims = tuple(m.n_atoms for m in inst.marginals)
    n = inst.n_retailers
    out = []
    for flat in range(k):
        idx = np.unravel_index(flat, dims)
        d = np.empty(n)
        for r, block in enumerate(inst.partition):
            d[list(block)] = inst.marginals[r].atoms[idx[r]]
        out.append((d, tuple(int(i) for i in idx)))
    return out


def aggregate_demand(atom: Sequence[float], s) -> float:
    """Total demand of coalition `s` at one joint atom; empty coalition -> 0."""
    atom = np.asarray(atom, dtype=float)
    mask = coalition_mask(s, atom.size)
    total = 0.0
    i = 0
    while mask:
        if mask & 1:
            total += float(atom[i])
        mask >>= 1
        i += 1
    return total


# ---------------------------------------------------------------------------
# Joint distribution constructors
# ---------------------------------------------------------------------------


def independent_joint(inst: Instance, cap: int = DEFAULT_SUPPORT_CAP) -> JointDistribution:
    """Product of the block marginals: q_k = prod_r p_r^{l_r}."""
    _check_cap(inst, cap)
    q = inst.marginals[0].probs
    for m in inst.marginals[1:]:
        q = np.multiply.outer(q, m.probs)
    return JointDistribution(np.ascontiguousarray(q).ravel())


def contaminate(
    p_independent: JointDistribution, p_extremal: JointDistribution, lam: float
) -> JointDistribution:
    """Convex mixture with `lam` the weight on the extremal distribution:
    (1 - lam) * p_independent + lam * p_extremal."""
    if not (0.0 <= lam <= 1.0):
        raise InputError(f"contamination weight must lie in [0, 1], got {lam}")
    if p_independent.n_atoms != p_extremal.n_atoms:
        raise InputError(
            f"distributions live on different supports "
            f"({p_independent.n_atoms} vs {p_extremal.n_atoms} atoms)"
        )
    return JointDistribution((1.0 - lam) * p_independent.q + lam * p_extremal.q)


def sample_extremal(
    inst: Instance, cost: Sequence[float], cap: int = DEFAULT_SUPPORT_CAP
) -> JointDistribution:
    """A vertex of the consistency polytope maximizing cost @ q.

    The polytope is never empty (the independent joint is feasible), so an
    infeasible LP here is an internal error.
    """
    poly = get_polytope(inst, cap)
    cost = np.asarray(cost, dtype=float)
    if cost.shape != (poly.n_atoms,):
        raise InputError(
            f"cost vector has shape {cost.shape}, expected ({poly.n_atoms},)"
        )
    if not np.all(np.isfinite(cost)):
        raise InputError("cost vector must be finite")
    value, q, _basis = poly.maximize(cost)
    del value
    return JointDistribution(np.maximum(q, 0.0))


def check_consistency(
    inst: Instance, joint: JointDistribution, tol: float = CONSISTENCY_TOL
) -> float:
    """Largest violation of the per-value marginal constraints; raises
    InputError beyond `tol`."""
    poly = get_polytope(inst)
    worst = poly.consistency_gap(joint.q)
    if worst > tol:
        raise InputError(
            f"joint distribution violates marginal consistency by {worst:.3e} (> {tol:g})"
        )
    return worst


# ---------------------------------------------------------------------------
# The consistency polytope
# ---------------------------------------------------------------------------


class FrechetPolytope:
    """The polytope Q of joint probability vectors consistent with the block
    marginals, as a rank-full equality system over R^K.

    Rows: for each block r one row per distinct atom value except the last,
    plus a single total-mass row. The dropped per-block rows are implied by
    the kept ones, which keeps the system nonsingular for the simplex.

    Immutable after construction; safe to share across threads.
    """

    def __init__(self, inst: Instance, cap: int = DEFAULT_SUPPORT_CAP):
        self.instance = inst
        self.n_atoms = _check_cap(inst, cap)
        dims = tuple(m.n_atoms for m in inst.marginals)
        self.dims = dims

        # Distinct-value classes per block (duplicate atoms merge).
        self.class_of: list[np.ndarray] = []     # original atom -> class id
        self.class_probs: list[np.ndarray] = []  # class -> summed probability
        self.class_reps: list[np.ndarray] = []   # class -> representative atom
        for m in inst.marginals:
            _, rep, inv = np.unique(
                m.atoms, axis=0, return_index=True, return_inverse=True
            )
            inv = inv.reshape(-1)
            probs = np.bincount(inv, weights=m.probs, minlength=rep.size)
            self.class_of.append(inv.astype(np.int64))
            self.class_probs.append(probs)
            self.class_reps.append(rep.astype(np.int64))

        # Joint atom -> per-block class id, in the lexicographic convention.
        k = self.n_atoms
        self.block_class: list[np.ndarray] = []
        trailing = k
        for r, kr in enumerate(dims):
            trailing //= kr
            atom_idx = (np.arange(k) // trailing) % kr
            self.block_class.append(self.class_of[r][atom_idx])

        rows, rhs = [np.ones((1, k))], [1.0]
        for r in range(inst.n_blocks):
            c_r = self.class_probs[r].size
            if c_r > 1:
                block_rows = (
                    self.block_class[r][None, :] == np.arange(c_r - 1)[:, None]
                ).astype(float)
                rows.append(block_rows)
                rhs.extend(self.class_probs[r][: c_r - 1])
        self.matrix = np.vstack(rows)
        self.rhs = np.asarray(rhs, dtype=float)
        self.matrix.setflags(write=False)
        self.rhs.setflags(write=False)
        self.crash_basis = self._northwest_basis()

    @property
    def n_rows(self) -> int:
        return self.matrix.shape[0]

    def _northwest_basis(self) -> tuple[int, ...]:
        """Greedy sequential-fill vertex; its support has exactly n_rows
        columns and forms a starting basis (the classic staircase for R=2)."""
        res = [p.copy() for p in self.class_probs]
        ptr = [0] * len(res)
        cols: list[int] = []
        dims = self.dims
        while True:
            w = min(res[r][ptr[r]] for r in range(len(res)))
            for r in range(len(res)):
                res[r][ptr[r]] -= w
            rep = tuple(int(self.class_reps[r][ptr[r]]) for r in range(len(res)))
            cols.append(int(np.ravel_multi_index(rep, dims)))
            advance = [
                r
                for r in range(len(res))
                if res[r][ptr[r]] <= 1e-15 and ptr[r] < len(res[r]) - 1
            ]
            if not advance:
                break
            ptr[advance[0]] += 1
        return tuple(cols)

    def consistency_gap(self, q: np.ndarray) -> float:
        """Largest absolute violation across all per-value class constraints
        (including the per-block rows the LP system drops as redundant)."""
        q = np.asarray(q, dtype=float)
        worst = abs(float(np.sum(q)) - 1.0)
        for r in range(len(self.block_class)):
            got = np.bincount(
                self.block_class[r], weights=q, minlength=self.class_probs[r].size
            )
            worst = max(worst, float(np.max(np.abs(got - self.class_probs[r]))))
        return worst

    def lp(self, objective: np.ndarray, sense: str = "max") -> LinearProgram:
        return LinearProgram(
            sense=sense, objective=objective, a_eq=self.matrix, b_eq=self.rhs
        )

    def maximize(
        self, cost: np.ndarray, start_basis: Sequence[int] | None = None
    ) -> tuple[float, np.ndarray, tuple[int, ...]]:
        """max cost @ q over the polytope; returns (value, vertex, basis)."""
        sol = solve_lp(self.lp(cost), start_basis or self.crash_basis)
        if sol.status != "optimal":
            raise SolverError(
                f"consistency polytope LP reported {sol.status!r}; "
                "the polytope is nonempty and bounded, so this is an internal error"
            )
        return float(sol.objective_value), sol.x, sol.basis

    def coalition_block_values(self, mask: int) -> list[np.ndarray]:
        """Per block r, aggregate demand of S cap N_r at each value class."""
        out = []
        for r, block in enumerate(self.instance.partition):
            cols = [j for j, i in enumerate(block) if mask >> i & 1]
            atoms = self.instance.marginals[r].atoms
            if cols:
                vals = atoms[:, cols].sum(axis=1)[self.class_reps[r]]
            else:
                vals = np.zeros(self.class_reps[r].size)
            out.append(vals)
        return out

    def coalition_demands(self, mask: int) -> np.ndarray:
        """Aggregate demand d_k(S) at every joint atom, shape (K,)."""
        per_block = self.coalition_block_values(mask)
        total = np.zeros(self.n_atoms)
        for r, vals in enumerate(per_block):
            total += vals[self.block_class[r]]
        return total


_POLYTOPES: "weakref.WeakKeyDictionary[Instance, FrechetPolytope]" = (
    weakref.WeakKeyDictionary()
)


def get_polytope(inst: Instance, cap: int = DEFAULT_SUPPORT_CAP) -> FrechetPolytope:
    poly = _POLYTOPES.get(inst)
    if poly is None:
        poly = FrechetPolytope(inst, cap)
        _POLYTOPES[inst] = poly
    return poly


# ---------------------------------------------------------------------------
# Instance files
# ---------------------------------------------------------------------------


def instance_to_dict(inst: Instance) -> dict:
    return {
        "price": inst.price,
        "cost": inst.cost,
        "partition": [list(b) for b in inst.partition],
        "marginals": [
            {"atoms": m.atoms.tolist(), "probs": m.probs.tolist()}
            for m in inst.marginals
        ],
    }


def instance_from_dict(data: dict) -> Instance:
    if not isinstance(data, dict):
        raise InputError(f"instance document must be an object, got {type(data).__name__}")
    for key in ("price", "cost", "partition", "marginals"):
        if key not in data:
            raise InputError(f"instance document is missing field {key!r}")
    raw_marginals = data["marginals"]
    if not isinstance(raw_marginals, list):
        raise InputError("field 'marginals' must be a list")
    marginals = []
    for r, entry in enumerate(raw_marginals):
        if not isinstance(entry, dict) or "atoms" not in entry or "probs" not in entry:
            raise InputError(f"marginals[{r}] must be an object with 'atoms' and 'probs'")
        try:
            marginals.append(DiscreteMarginal(np.asarray(entry["atoms"], dtype=float),
                                              np.asarray(entry["probs"], dtype=float)))
        except (InputError, ValueError, TypeError) as exc:
            raise InputError(f"marginals[{r}]: {exc}") from exc
    try:
        return Instance(
            price=float(data["price"]),
            cost=float(data["cost"]),
            partition=tuple(tuple(int(i) for i in b) for b in data["partition"]),
            marginals=tuple(marginals),
        )
    except (InputError, ValueError, TypeError) as exc:
        raise InputError(f"instance document invalid: {exc}") from exc


def load_instance(path) -> Instance:
    with open(path, "r", encoding="utf-8") as fh:
        try:
            data = json.load(fh)
        except json.JSONDecodeError as exc:
            raise InputError(f"{path}: line {exc.lineno}, column {exc.colno}: {exc.msg}") from exc
    try:
        return instance_from_dict(data)
    except InputError as exc:
        raise InputError(f"{path}: {exc}") from exc


def save_instance(inst: Instance, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(instance_to_dict(inst), fh, indent=2)
        fh.write("\n")
