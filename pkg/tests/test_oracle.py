import math

import numpy as np
import pytest

from minimax_bid import oracle, pab, upa
from minimax_bid.regret import max_loss
from minimax_bid.values import MarginalValueCurve, StepBid, ValueVector, clipped_surplus, value_mass

from conftest import random_curve

ONE = MarginalValueCurve.constant(1.0)
GOLD = (math.sqrt(5) - 1) / 2


def random_bid(rng, v, max_points=3):
    m = int(rng.integers(1, max_points + 1))
    qs = np.sort(rng.choice(np.arange(1, 17) * v.Q / 16, size=m, replace=False))
    bs = np.sort(rng.uniform(0.0, v.top, size=m))[::-1]
    return StepBid(tuple(qs), tuple(bs))


class TestBestResponse:
    def test_free_goods(self, rng):
        v = random_curve(rng)
        S = oracle.SupplyCurve(StepBid((), ()), v.Q)
        assert oracle.best_response_utility(S, v) == pytest.approx(value_mass(v, 0, v.Q))

    def test_priced_out(self, rng):
        v = random_curve(rng)
        S = oracle.SupplyCurve(StepBid((v.Q,), (v.top,)), v.Q)
        assert oracle.best_response_utility(S, v) == pytest.approx(0.0, abs=1e-15)

    def test_two_step(self, rng):
        for _ in range(50):
            v = random_curve(rng)
            q, p = rng.uniform(0, v.Q), rng.uniform(0, v.top)
            S = oracle.SupplyCurve.two_step(q, p, v.Q)
            expected = max(value_mass(v, 0, q), clipped_surplus(v, p, 0, v.Q))
            assert oracle.best_response_utility(S, v) == pytest.approx(expected, abs=1e-12)

    def test_price_to_win(self):
        S = oracle.SupplyCurve.two_step(0.3, 0.8, 1.0)
        assert S.price_to_win(0.0) == 0.0
        assert S.price_to_win(0.3) == 0.0
        assert S.price_to_win(0.31) == 0.8


class TestBruteForce:
    def test_zero_bid(self, rng):
        v = random_curve(rng)
        bf = oracle.brute_force_max_loss(StepBid((), ()), v, "pab", 16, 16)
        assert bf == pytest.approx(value_mass(v, 0, v.Q), abs=1e-12)

    def test_two_unit_solution(self):
        v = ValueVector((1.0, 0.5))
        report = oracle.verify(pab.solve_multiunit(v).bid, v, "pab")
        assert report["passed"]
        assert report["analytic"] == pytest.approx(4 / 9 + 1 / 6)

    def test_bounded_by_analytic(self, rng):
        for _ in range(6):
            v = random_curve(rng)
            bid = random_bid(rng, v)
            for fmt in ("pab", "lab"):
                res = oracle.brute_force(bid, v, fmt, 32, 32, n_random=64)
                exact = max_loss(fmt, bid, v)
                tol = oracle.default_tolerance(v, 32)
                assert res.loss <= exact + 1e-12
                assert res.two_step_loss >= exact - tol
                assert res.random_loss <= res.two_step_loss + 1e-12

    @pytest.mark.parametrize("fmt, solve", [
        ("pab", lambda v: pab.solve_constrained(v, 2, starts=4)),
        ("lab", lambda v: upa.solve_constrained(v, 2)),
    ])
    def test_corrupted_bid_exposed(self, fmt, solve):
        v = MarginalValueCurve((0.4, 1.0), (1.0, 0.7))
        sol = solve(v)
        good = sol.bid
        bad = StepBid(good.quantities, (good.levels[0] + 0.1,) + good.levels[1:])
        tol = oracle.default_tolerance(v)
        report = oracle.verify(bad, v, fmt)
        assert report["passed"]
        assert report["brute_force"] > sol.loss + tol
        S = oracle.SupplyCurve.from_points([(p["q"], p["b"]) for p in report["witness"]["points"]], v.Q)
        assert oracle.regret_against(bad, S, v, fmt) > sol.loss + tol

    @pytest.mark.parametrize("fmt, bid", [
        ("pab", StepBid((1.0,), (0.5,))),
        ("lab", StepBid((GOLD,), (GOLD,))),
    ])
    def test_single_point_witness_is_two_step(self, fmt, bid):
        res = oracle.brute_force(bid, ONE, fmt, 64, 64)
        assert res.two_step_loss == pytest.approx(res.loss)
        assert res.witness.demand.M <= 1
        assert res.loss == pytest.approx(max_loss(fmt, bid, ONE), abs=oracle.default_tolerance(ONE))

    def test_solver_outputs_pass(self, rng):
        v = random_curve(rng)
        bid, _ = upa.solve_constrained(v, 2)
        assert oracle.verify(bid, v, "lab", q_grid=32, p_grid=32)["passed"]

    def test_uniform_regret_never_above_pay_as_bid(self, rng):
        for _ in range(5):
            v = random_curve(rng)
            bid = random_bid(rng, v)
            for q in np.linspace(0, v.Q, 9):
                for p in np.linspace(0, v.top, 9):
                    S = oracle.SupplyCurve.two_step(q, p, v.Q)
                    assert (oracle.regret_against(bid, S, v, "lab")
                            <= oracle.regret_against(bid, S, v, "pab") + 1e-12)

    def test_rejects_coarse_grid(self):
        with pytest.raises(ValueError):
            oracle.brute_force(StepBid((1.0,), (0.5,)), ONE, "pab", 4, 4)
