"""Contamination stress experiments: random instances, robust vs
independence-based decisions, and excess values under mixtures of the
independent joint with adversarial extremal vertices.

The excess of a decision (y, z) under a realized joint q is the largest
positive shortfall, over nonempty proper coalitions S, of z(S) against the
ratio of S's achievable profit to the grand profit at y. Coalitions inside a
single block order their known-distribution quantile; coalitions spanning
blocks order optimally for the realized q.

Everything is reproducible from the config seed: instance generation,
extremal sampling, and the (instance, lambda) aggregation order.
"""

from __future__ import annotations

import csv
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .coop import build_deterministic_game, least_core
from .distributions import (
    DiscreteMarginal,
    Instance,
    JointDistribution,
    contaminate,
    get_polytope,
    independent_joint,
    sample_extremal,
)
from .errors import DomainError, GameInvalidError, InputError, SolverError
from .newsvendor import block_demand, optimal_order, quantile_order
from .robust_game import Decision, RobustGameSolver

WITNESS_POOL_CAP = 256
_DEFAULT_LAMBDAS = tuple(round(0.1 * i, 1) for i in range(11))

CSV_HEADER = (
    "instance_id,lambda,rob_max,rob_min,rob_mean,det_max,det_min,det_mean,degenerate_count"
)


@dataclass(frozen=True, eq=False)
class ExperimentConfig:
    """Knobs for one stress run; all randomness derives from `seed`."""

    n: int
    block_sizes: tuple[int, ...]
    atoms_per_block: tuple[int, ...]
    support_lo: int = 1
    support_hi: int = 10
    price: float = 1.5
    cost: float = 1.0
    lambda_grid: tuple[float, ...] = _DEFAULT_LAMBDAS
    num_extremal: int = 100
    num_instances: int = 20
    seed: int = 0

    def __post_init__(self):
        blocks = tuple(int(b) for b in self.block_sizes)
        object.__setattr__(self, "block_sizes", blocks)
        if sum(blocks) != self.n or any(b <= 0 for b in blocks):
            raise InputError(
                f"block sizes {blocks} must be positive and sum to n={self.n}"
            )
        atoms = self.atoms_per_block
        if isinstance(atoms, (int, np.integer)):
            atoms = tuple(int(atoms) for _ in blocks)
        else:
            atoms = tuple(int(a) for a in atoms)
        if len(atoms) != len(blocks) or any(a <= 0 for a in atoms):
            raise InputError(
                f"atoms_per_block {atoms} must give a positive count per block"
            )
        object.__setattr__(self, "atoms_per_block", atoms)
        if not (0 < self.cost < self.price):
            raise InputError(
                f"prices must satisfy 0 < cost < price, got {self.cost}, {self.price}"
            )
        if not (0 < self.support_lo <= self.support_hi):
            raise InputError(
                f"demand support [{self.support_lo}, {self.support_hi}] must be positive"
            )
        lam = tuple(float(v) for v in self.lambda_grid)
        if any(not (0.0 <= v <= 1.0) for v in lam):
            raise InputError(f"lambda grid {lam} must lie in [0, 1]")
        object.__setattr__(self, "lambda_grid", lam)
        if self.num_instances < 1 or self.num_extremal < 0:
            raise InputError("num_instances must be >= 1 and num_extremal >= 0")


@dataclass(frozen=True)
class ExcessRow:
    """Aggregated excess statistics for one instance at one lambda."""

    instance_id: int
    lam: float
    rob_max: float
    rob_min: float
    rob_mean: float
    det_max: float
    det_min: float
    det_mean: float
    degenerate_count: int

    def __post_init__(self):
        for lo, mid, hi in (
            (self.rob_min, self.rob_mean, self.rob_max),
            (self.det_min, self.det_mean, self.det_max),
        ):
            if not (lo <= mid + 1e-12 and mid <= hi + 1e-12) or lo < -1e-12:
                raise SolverError(
                    f"excess statistics out of order: min={lo}, mean={mid}, max={hi}"
                )


@dataclass(frozen=True)
class ExcessStats:
    rows: tuple[ExcessRow, ...]

    def rows_for_lambda(self, lam: float, tol: float = 1e-9) -> list[ExcessRow]:
        return [r for r in self.rows if abs(r.lam - lam) <= tol]


def gen_instance(cfg: ExperimentConfig, instance_seed: int) -> Instance:
    """Random instance: per block, atoms uniform on the integer box
    [support_lo, support_hi]^size and probabilities as normalized uniform
    draws. Deterministic per seed."""
    rng = np.random.default_rng(instance_seed)
    marginals = []
    for size, k_r in zip(cfg.block_sizes, cfg.atoms_per_block):
        atoms = rng.integers(cfg.support_lo, cfg.support_hi + 1, (k_r, size)).astype(float)
        weights = rng.random(k_r)
        total = float(np.sum(weights))
        if total <= 0.0:
            weights = np.ones(k_r)
            total = float(k_r)
        probs = weights / total
        probs[-1] = 1.0 - float(np.sum(probs[:-1]))  # exact unit mass
        marginals.append(DiscreteMarginal(atoms, probs))
    bounds = np.cumsum((0,) + cfg.block_sizes)
    partition = tuple(
        tuple(range(bounds[r], bounds[r + 1])) for r in range(len(cfg.block_sizes))
    )
    return Instance(cfg.price, cfg.cost, partition, tuple(marginals))


def _deterministic_decision(inst: Instance) -> Decision:
    """Core allocation of the deterministic game under the independent
    joint, expressed as multiples of the grand value, with its optimal
    grand order."""
    q_ind = independent_joint(inst)
    game = build_deterministic_game(inst, q_ind)
    if game.grand_value <= 0.0:
        raise GameInvalidError("grand-coalition value is nonpositive; cannot form multiples")
    x, s_value = least_core(game)
    if s_value > 1e-7:
        # Deterministic newsvendor games always have a core allocation.
        raise SolverError(
            f"deterministic least core came out positive ({s_value}); solver bug"
        )
    y_det = optimal_order(inst, q_ind, inst.grand_mask).y_star
    return Decision(y_det, x / game.grand_value)


def solve_pair(
    inst: Instance, y_tol: float | None = None
) -> tuple[Decision, Decision]:
    """(robust decision, independence-based decision). The robust side is a
    stable decision when one exists, otherwise the least-core decision."""
    robust, _solver = _solve_robust(inst, y_tol)
    return robust, _deterministic_decision(inst)


def _solve_robust(
    inst: Instance, y_tol: float | None = None
) -> tuple[Decision, RobustGameSolver]:
    solver = RobustGameSolver(inst)
    decision = solver.core_decision()
    if decision is None:
        decision, _eps = solver.least_core(y_tol)
    return decision, solver


class ExcessEvaluator:
    """Excess values of decisions under many joints on one instance."""

    def __init__(self, inst: Instance):
        self.inst = inst
        self.poly = get_polytope(inst)
        self.p, self.c = inst.price, inst.cost
        self.ratio = inst.ratio
        self.d_grand = self.poly.coalition_demands(inst.grand_mask)
        block_masks = inst.block_masks
        self._masks = []
        for mask in range(1, inst.grand_mask):
            d_s = self.poly.coalition_demands(mask)
            met = [r for r, bm in enumerate(block_masks) if mask & bm]
            if len(met) == 1:
                # Known marginal: the order is pinned to its quantile.
                y_s = quantile_order(block_demand(inst, met[0], mask), self.ratio)
                self._masks.append((mask, d_s, None, y_s))
            else:
                order = np.argsort(d_s, kind="stable")
                self._masks.append((mask, d_s, order, None))

    def excess(self, q: JointDistribution | np.ndarray, decision: Decision) -> float:
        qv = q.q if isinstance(q, JointDistribution) else np.asarray(q, dtype=float)
        p, c = self.p, self.c
        den = (p - c) * decision.y - p * float(
            np.maximum(decision.y - self.d_grand, 0.0) @ qv
        )
        if den <= 0.0:
            raise DomainError(
                f"grand profit {den} is nonpositive under the realized joint; "
                "excess is undefined"
            )
        z = decision.z
        n = z.size
        zsum = np.zeros(1 << n)
        for mask in range(1, 1 << n):
            low = mask & -mask
            zsum[mask] = zsum[mask ^ low] + z[low.bit_length() - 1]
        worst = 0.0
        for mask, d_s, order, y_fixed in self._masks:
            if y_fixed is None:
                sv = d_s[order]
                cdf = np.cumsum(qv[order])
                idx = int(np.searchsorted(cdf, self.ratio - 1e-12, side="left"))
                idx = min(idx, sv.size - 1)
                y_s = float(sv[idx])
            else:
                y_s = y_fixed
            numer = (p - c) * y_s - p * float(np.maximum(y_s - d_s, 0.0) @ qv)
            worst = max(worst, numer / den - float(zsum[mask]))
        return max(worst, 0.0)


def excess(inst: Instance, q: JointDistribution, decision: Decision) -> float:
    """Largest positive coalition dissatisfaction of `decision` when the
    joint distribution turns out to be `q`."""
    return ExcessEvaluator(inst).excess(q, decision)


# ---------------------------------------------------------------------------
# The experiment loop
# ---------------------------------------------------------------------------


def _dedupe_pool(pool: Sequence[np.ndarray], cap: int = WITNESS_POOL_CAP) -> list[np.ndarray]:
    kept: list[np.ndarray] = []
    for q in pool:
        if len(kept) >= cap:
            break
        if not any(np.max(np.abs(q - other)) <= 1e-10 for other in kept):
            kept.append(q)
    return kept


def _instance_rows(args: tuple[ExperimentConfig, int, int, int, float | None]) -> list[ExcessRow]:
    cfg, instance_id, instance_seed, sampling_seed, y_tol = args
    inst = gen_instance(cfg, instance_seed)
    robust, solver = _solve_robust(inst, y_tol)
    det = _deterministic_decision(inst)
    q_ind = independent_joint(inst)

    rng = np.random.default_rng(sampling_seed)
    pool: list[np.ndarray] = []
    for _ in range(cfg.num_extremal):
        cost = rng.uniform(-1.0, 1.0, inst.joint_size())
        pool.append(sample_extremal(inst, cost).q)
    pool.extend(solver.collect_witnesses())
    pool = _dedupe_pool(pool)
    if not pool:
        pool = [q_ind.q]

    evaluator = ExcessEvaluator(inst)
    rows = []
    for lam in cfg.lambda_grid:
        rob_vals, det_vals, degenerate = [], [], 0
        for q_ext in pool:
            mixed = contaminate(q_ind, JointDistribution(q_ext), lam)
            try:
                e_rob = evaluator.excess(mixed, robust)
                e_det = evaluator.excess(mixed, det)
            except DomainError:
                degenerate += 1
                continue
            rob_vals.append(e_rob)
            det_vals.append(e_det)
        if not rob_vals:
            raise SolverError(
                f"instance {instance_id}: every sample at lambda={lam} was degenerate"
            )
        rows.append(
            ExcessRow(
                instance_id=instance_id,
                lam=lam,
                rob_max=float(max(rob_vals)),
                rob_min=float(min(rob_vals)),
                rob_mean=float(np.mean(rob_vals)),
                det_max=float(max(det_vals)),
                det_min=float(min(det_vals)),
                det_mean=float(np.mean(det_vals)),
                degenerate_count=degenerate,
            )
        )
    return rows


def run_stress(
    cfg: ExperimentConfig,
    workers: int | None = None,
    csv_path=None,
    y_tol: float | None = None,
) -> ExcessStats:
    """Run the full experiment: per instance, solve both decisions, build
    the extremal pool (random-cost vertices plus worst-case ratio
    witnesses), and aggregate excess statistics per lambda.

    A sample is excluded (and counted) when either decision's realized grand
    profit is nonpositive under it. Results are reduced in (instance,
    lambda) order regardless of worker scheduling."""
    seeds = np.random.SeedSequence(cfg.seed).generate_state(2 * cfg.num_instances, np.uint32)
    jobs = [
        (cfg, i, int(seeds[2 * i]), int(seeds[2 * i + 1]), y_tol)
        for i in range(cfg.num_instances)
    ]
    if workers and workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            per_instance = list(pool.map(_instance_rows, jobs))
    else:
        per_instance = [_instance_rows(job) for job in jobs]
    rows = [row for instance_rows in per_instance for row in instance_rows]
    rows.sort(key=lambda r: (r.instance_id, r.lam))
    stats = ExcessStats(tuple(rows))
    if csv_path is not None:
        write_csv(stats, csv_path)
    return stats


def write_csv(stats: ExcessStats, path) -> None:
    """One row per instance x lambda, 9 significant digits, header included."""
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(CSV_HEADER.split(","))
        for r in stats.rows:
            writer.writerow(
                [r.instance_id, f"{r.lam:.9g}"]
                + [
                    f"{v:.9g}"
                    for v in (
                        r.rob_max, r.rob_min, r.rob_mean,
                        r.det_max, r.det_min, r.det_mean,
                    )
                ]
                + [r.degenerate_count]
            )


def config_from_dict(data: dict) -> ExperimentConfig:
    if not isinstance(data, dict):
        raise InputError("experiment config must be an object")
    required = {"n", "block_sizes", "atoms_per_block", "seed"}
    missing = sorted(required - set(data))
    if missing:
        raise InputError(f"experiment config is missing fields: {', '.join(missing)}")
    known = {
        "n", "block_sizes", "atoms_per_block", "support_lo", "support_hi",
        "price", "cost", "lambda_grid", "num_extremal", "num_instances", "seed",
    }
    unknown = sorted(set(data) - known)
    if unknown:
        raise InputError(f"experiment config has unknown fields: {', '.join(unknown)}")
    kwargs = dict(data)
    kwargs["block_sizes"] = tuple(data["block_sizes"])
    try:
        kwargs["atoms_per_block"] = tuple(data["atoms_per_block"])
    except TypeError:
        kwargs["atoms_per_block"] = data["atoms_per_block"]
    if "lambda_grid" in kwargs:
        kwargs["lambda_grid"] = tuple(kwargs["lambda_grid"])
    try:
        return ExperimentConfig(**kwargs)
    except TypeError as exc:
        raise InputError(f"experiment config invalid: {exc}") from exc
