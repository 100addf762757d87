import numpy as np
import pytest

from nvgames.coop import balancedness_dual_check
from nvgames.distributions import (
    DiscreteMarginal,
    Instance,
    independent_joint,
)
from nvgames.errors import DomainError, InputError
from nvgames.newsvendor import expected_profit, optimal_order, worst_case_order
from nvgames.robust_game import (
    Decision,
    RobustGameSolver,
    VmaxResult,
    VmaxTable,
    imputation_exists,
    robust_core,
    robust_least_core,
    sigma,
    verify_rcore2,
    vmax,
)

from conftest import make_example1, random_instance
from oracles import brute_force_vmax


class TestVmax:
    def test_t1_singletons(self, t1):
        assert vmax(t1, 3.0, {0}).value == pytest.approx(1.0 / 3.0, abs=1e-12)
        assert vmax(t1, 3.0, {1}).value == pytest.approx(2.0 / 3.0, abs=1e-12)

    def test_rejects_empty_and_grand(self, t1):
        with pytest.raises(InputError):
            vmax(t1, 3.0, 0)
        with pytest.raises(InputError):
            vmax(t1, 3.0, 0b11)

    def test_order_outside_interval_is_domain_error(self, t1):
        with pytest.raises(DomainError):
            vmax(t1, 50.0, {0})

    def test_example1_pair_ratios_small_k(self):
        k = 24
        inst = make_example1(k)
        solver = RobustGameSolver(inst)
        y = solver.grand_wc.y_star
        target = 6.0 / 7.0
        assert solver.vmax(y, 0b011).value == pytest.approx(target, rel=4.0 / k)
        assert solver.vmax(y, 0b101).value >= target * (1.0 - 4.0 / k)
        assert solver.vmax(y, 0b110).value >= target * (1.0 - 4.0 / k)

    def test_matches_brute_force_on_tiny_instances(self):
        hits = 0
        for seed in range(12):
            inst = random_instance(seed, n=3, block_sizes=(2, 1), atoms_per_block=(2, 2))
            solver = RobustGameSolver(inst)
            y = solver.grand_wc.y_star
            vmin, _ = solver.min_grand_profit(y)
            if vmin <= 1e-9:
                continue
            for mask in range(1, inst.grand_mask):
                expect = brute_force_vmax(inst, y, mask)
                got = solver.vmax(y, mask).value
                assert got == pytest.approx(expect, abs=1e-8)
                hits += 1
        assert hits >= 30

    def test_dominates_independent_joint_ratio(self):
        for seed in range(8):
            inst = random_instance(seed, n=4, block_sizes=(2, 2), atoms_per_block=(2, 2))
            q = independent_joint(inst)
            solver = RobustGameSolver(inst)
            y = solver.grand_wc.y_star
            den = expected_profit(inst, q, y, inst.grand_mask)
            for mask in range(1, inst.grand_mask):
                numer = optimal_order(inst, q, mask).value
                assert solver.vmax(y, mask).value >= numer / den - 1e-9

    def test_single_block_shortcut_matches_ratio_lp(self):
        # The shortcut value for a one-block coalition must agree with the
        # generic enumeration run on the same coalition.
        for seed in range(6):
            inst = random_instance(seed, n=3, block_sizes=(2, 1), atoms_per_block=(2, 2))
            solver = RobustGameSolver(inst)
            y = solver.grand_wc.y_star
            vmin, q_min = solver.min_grand_profit(y)
            for mask in (0b001, 0b010, 0b011, 0b100):
                d_s, _gammas, _mean = solver._coalition_data(mask)
                res = solver.vmax(y, mask)
                brute = brute_force_vmax(inst, y, mask)
                assert res.value == pytest.approx(brute, abs=1e-8)
                del d_s

    def test_witness_attains_value(self, t2):
        solver = RobustGameSolver(t2)
        y = solver.grand_wc.y_star
        res = solver.vmax(y, 0b01)
        q = res.q
        p, c = t2.price, t2.cost
        d_s = solver.poly.coalition_demands(0b01)
        numer = (p - c) * res.gamma - p * float(np.maximum(res.gamma - d_s, 0.0) @ q)
        den = (p - c) * y - p * float(np.maximum(y - solver.d_grand, 0.0) @ q)
        assert numer / den == pytest.approx(res.value, abs=1e-9)

    def test_value_convex_in_y(self):
        for seed in range(5):
            inst = random_instance(seed, n=3, block_sizes=(2, 1), atoms_per_block=(2, 2))
            solver = RobustGameSolver(inst)
            from nvgames.newsvendor import grand_action_interval

            lo, hi = grand_action_interval(inst)
            rng = np.random.default_rng(seed + 100)
            for mask in (0b101, 0b011):
                for _ in range(10):
                    y1, y2 = sorted(rng.uniform(lo + 0.05 * (hi - lo), hi - 0.05 * (hi - lo), 2))
                    mid = 0.5 * (y1 + y2)
                    v1 = solver.vmax(y1, mask).value
                    v2 = solver.vmax(y2, mask).value
                    vm = solver.vmax(mid, mask).value
                    assert vm <= 0.5 * (v1 + v2) + 1e-8


class TestSigma:
    def test_t1(self, t1):
        eps, x = sigma(t1, 3.0)
        assert eps == pytest.approx(0.0, abs=1e-12)
        assert x == pytest.approx([1.0 / 3.0, 2.0 / 3.0], abs=1e-12)

    def test_zero_table_gives_equal_split(self, t1):
        table = VmaxTable(
            y=3.0,
            entries={m: VmaxResult(0.0, 0.0, np.array([])) for m in (0b01, 0b10)},
            min_grand_profit=3.0,
        )
        eps, x = sigma(t1, 3.0, table)
        assert eps == pytest.approx(-0.5)
        assert x == pytest.approx([0.5, 0.5])

    def test_example1_lower_bound(self):
        k = 24
        inst = make_example1(k)
        solver = RobustGameSolver(inst)
        eps, _x = solver.sigma(solver.grand_wc.y_star)
        assert eps >= (6.0 * 1.5 / (3 * 1.5 - 1.0) - 2.0) / 3.0 - 4.0 / k
        assert eps > 0.0


class TestRobustCore:
    def test_t1_decision(self, t1):
        d = robust_core(t1)
        assert d is not None
        assert d.y == pytest.approx(3.0, abs=1e-12)
        assert d.z == pytest.approx([1.0 / 3.0, 2.0 / 3.0], abs=1e-9)

    def test_example1_empty(self):
        assert robust_core(make_example1(24)) is None

    def test_single_block_instance_always_has_core(self):
        for seed in range(8):
            inst = random_instance(seed, n=3, block_sizes=(3,), atoms_per_block=(4,))
            d = robust_core(inst)
            assert d is not None
            assert verify_rcore2(inst, d, tol=1e-7)

    def test_verify_passes_on_returned_decisions(self):
        for seed in range(12):
            inst = random_instance(seed, n=4, block_sizes=(2, 2), atoms_per_block=(2, 2))
            d = robust_core(inst)
            if d is not None:
                assert verify_rcore2(inst, d, tol=1e-7)


class TestRobustLeastCore:
    def test_t1(self, t1):
        d, eps = robust_least_core(t1)
        assert eps == pytest.approx(0.0, abs=1e-9)
        assert d.y == pytest.approx(3.0, abs=1e-9)
        assert d.z == pytest.approx([1.0 / 3.0, 2.0 / 3.0], abs=1e-9)

    def test_example1_stays_positive(self):
        d, eps = robust_least_core(make_example1(16), y_tol=0.01)
        assert eps > 0.05
        assert abs(float(np.sum(d.z)) - 1.0) <= 1e-9

    def test_never_worse_than_worst_case_order_sigma(self):
        for seed in range(6):
            inst = random_instance(seed, n=3, block_sizes=(2, 1), atoms_per_block=(2, 2))
            solver = RobustGameSolver(inst)
            eps_wc, _ = solver.sigma(solver.grand_wc.y_star)
            _d, eps = solver.least_core(y_tol=0.01)
            assert eps <= eps_wc + 1e-9

    def test_sigma_midpoint_convexity(self):
        for seed in range(4):
            inst = random_instance(seed, n=3, block_sizes=(2, 1), atoms_per_block=(2, 2))
            solver = RobustGameSolver(inst)
            from nvgames.newsvendor import grand_action_interval

            lo, hi = grand_action_interval(inst)
            rng = np.random.default_rng(seed + 7)
            pad = 0.05 * (hi - lo)
            for _ in range(15):
                y1, y2 = rng.uniform(lo + pad, hi - pad, 2)
                mid = 0.5 * (y1 + y2)
                s1, _ = solver.sigma(y1)
                s2, _ = solver.sigma(y2)
                sm, _ = solver.sigma(mid)
                assert sm <= 0.5 * (s1 + s2) + 1e-8


class TestImputationExists:
    def test_t1_exact_sum(self, t1):
        ok, z = imputation_exists(t1)
        assert ok
        assert float(np.sum(z)) == pytest.approx(1.0, abs=1e-12)
        assert z == pytest.approx([1.0 / 3.0, 2.0 / 3.0], abs=1e-12)

    def test_example1_has_imputation_despite_empty_core(self):
        inst = make_example1(24)
        ok, z = imputation_exists(inst)
        assert ok
        assert robust_core(inst) is None
        assert float(np.sum(z)) == pytest.approx(1.0, abs=1e-9)

    def test_random_instances_always_true(self):
        for seed in range(20):
            inst = random_instance(seed, n=4, block_sizes=(2, 2), atoms_per_block=(3, 2))
            ok, z = imputation_exists(inst)
            assert ok
            # The certificate multiples are individually rational: each covers
            # the player's standalone worst-case ratio.
            solver = RobustGameSolver(inst)
            y = solver.grand_wc.y_star
            for i in range(inst.n_retailers):
                assert z[i] >= solver.vmax(y, 1 << i).value - 1e-9


class TestVerifyDecision:
    def test_t1_pass_and_failures(self, t1):
        d = robust_core(t1)
        assert verify_rcore2(t1, d)
        assert not verify_rcore2(t1, Decision(4.0, d.z))
        assert not verify_rcore2(t1, Decision(d.y, np.array([2.0 / 3.0, 1.0 / 3.0])))

    def test_block_sum_mismatch_fails(self):
        inst = random_instance(1, n=4, block_sizes=(2, 2), atoms_per_block=(2, 2))
        d = robust_core(inst)
        if d is None:
            d, _ = robust_least_core(inst, y_tol=0.05)
            assert not verify_rcore2(inst, d)
            return
        z = d.z.copy()
        shift = 0.2
        z[0] += shift
        z[-1] -= shift
        assert not verify_rcore2(inst, Decision(d.y, z))


class TestTheoremConsistency:
    def test_stability_sign_matches_balancedness(self):
        for seed in range(10):
            inst = random_instance(seed, n=4, block_sizes=(2, 2), atoms_per_block=(2, 2))
            solver = RobustGameSolver(inst)
            y = solver.grand_wc.y_star
            table = solver.table(y)
            eps, _ = solver.sigma(y)
            z_d = balancedness_dual_check(table.values, inst.n_retailers)
            if eps <= 1e-9:
                assert z_d <= 1e-7
            else:
                assert z_d > 1e-9
