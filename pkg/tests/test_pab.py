import math
import warnings

import numpy as np
import pytest
from scipy import optimize

from minimax_bid import pab
from minimax_bid.errors import InconsistentBidError
from minimax_bid.regret import max_loss, pab_under_regret
from minimax_bid.values import BidVector, MarginalValueCurve, StepBid, ValueVector

from conftest import random_curve, random_values

ONE = MarginalValueCurve.constant(1.0)
FIVE_UNIT_VALUES = ValueVector((1.0, 0.97, 0.96, 0.9, 0.85))
FIVE_UNIT_PAB = (0.567624742798354, 0.4811496913580247, 0.3833796296296296,
                 0.26805555555555555, 0.14166666666666666)


def two_unit_closed_form(v1, v2):
    b1 = (3 * v1 + 2 * v2) / 9 if 7 * v2 >= 3 * v1 else (3 * v1 - v2) / 6
    return b1, v2 / 3


class TestMultiunit:
    def test_two_units_upper_branch(self):
        b = pab.solve_multiunit(ValueVector((1.0, 0.5))).bid
        assert b.entries == pytest.approx((4 / 9, 1 / 6), abs=1e-12)

    def test_two_units_lower_branch(self):
        b = pab.solve_multiunit(ValueVector((1.0, 0.2))).bid
        assert b.entries == pytest.approx((0.466667, 0.066667), abs=1e-6)
        assert b.entries == pytest.approx(two_unit_closed_form(1.0, 0.2), abs=1e-12)

    def test_five_units(self):
        b = pab.solve_multiunit(FIVE_UNIT_VALUES).bid
        assert b.entries == pytest.approx(FIVE_UNIT_PAB, abs=1e-9)

    def test_last_bid(self, rng):
        for M in range(1, 8):
            v = random_values(rng, M)
            assert pab.solve_multiunit(v).bid[-1] == pytest.approx(v[-1] / (M + 1))

    def test_strictly_decreasing_below_value(self, rng):
        for _ in range(100):
            v = random_values(rng, int(rng.integers(2, 8)))
            b = pab.solve_multiunit(v).bid.entries
            assert all(x > y for x, y in zip(b, b[1:]))
            assert all(x < y for x, y in zip(b, v.entries))

    def test_flat_closed_form(self, rng):
        hits = 0
        for _ in range(300):
            M = int(rng.integers(1, 9))
            v = ValueVector(tuple(np.sort(rng.uniform(0.8, 1.0, size=M))[::-1]))
            if not pab.flat_value_condition(v):
                continue
            hits += 1
            got = pab.solve_multiunit(v).bid.entries
            assert got == pytest.approx(pab.flat_value_bids(v), abs=1e-10)
        assert hits > 50

    def test_equal_regret_certificate(self, rng):
        for _ in range(100):
            M = int(rng.integers(1, 7))
            v = random_values(rng, M)
            sol = pab.solve_multiunit(v)
            curve, step = v.to_curve(), sol.bid.to_step_bid()
            for k in range(M + 1):
                assert pab_under_regret(step, curve, k * v.unit_quantity) == pytest.approx(sol.loss, abs=1e-10)
            assert max_loss("pab", sol.bid, v) == pytest.approx(sol.loss, abs=1e-10)

    def test_unit_quantity_scaling(self):
        base = pab.solve_multiunit(ValueVector((1.0, 0.6, 0.3)))
        wide = pab.solve_multiunit(ValueVector((1.0, 0.6, 0.3), unit_quantity=2.5))
        assert wide.bid.entries == pytest.approx(base.bid.entries)
        assert max_loss("pab", wide.bid, ValueVector((1.0, 0.6, 0.3), 2.5)) == pytest.approx(base.loss)

    def test_perturbation_raises_loss(self, rng):
        delta = 1e-7
        for _ in range(30):
            M = int(rng.integers(2, 6))
            v = random_values(rng, M)
            sol = pab.solve_multiunit(v)
            for k in range(M):
                for sign in (-1, 1):
                    e = list(sol.bid.entries)
                    e[k] += sign * delta
                    if any(x < y for x, y in zip(e, e[1:])) or min(e) < 0:
                        continue
                    assert max_loss("pab", BidVector(tuple(e)), v) > sol.loss


class TestInversion:
    def test_two_units(self):
        v = pab.invert_multiunit(BidVector((4 / 9, 1 / 6)))
        assert v.entries == pytest.approx((1.0, 0.5), abs=1e-12)

    def test_five_units(self):
        v = pab.invert_multiunit(BidVector((0.567625, 0.481150, 0.383380, 0.268056, 0.141667)))
        assert v.entries == pytest.approx(FIVE_UNIT_VALUES.entries, abs=1e-4)

    def test_zero_last_bid(self):
        v = pab.invert_multiunit(BidVector((0.3, 0.0)))
        assert v[-1] == 0.0

    def test_not_rationalizable(self):
        with pytest.raises(InconsistentBidError):
            pab.invert_multiunit(BidVector((0.5, 0.49)))

    def test_round_trip(self, rng):
        for _ in range(100):
            v = random_values(rng, int(rng.integers(1, 9)))
            back = pab.invert_multiunit(pab.solve_multiunit(v).bid)
            assert max(abs(a - b) for a, b in zip(back.entries, v.entries)) < 1e-9


def constant_closed_form_levels(M):
    r = M / (M + 1)
    return [sum(r ** (j - k + 1) for j in range(k, M + 1)) / M for k in range(1, M + 1)]


class TestConstrained:
    @pytest.mark.parametrize("M, b1", [(1, 0.5), (2, 0.5555555555555556), (5, 0.5981224279835392)])
    def test_constant_value(self, M, b1):
        sol = pab.solve_constrained(ONE, M)
        assert sol.bid.levels[0] == pytest.approx(b1, abs=1e-9)
        assert sol.bid.quantities == pytest.approx([k / M for k in range(1, M + 1)], abs=1e-6)
        assert sol.bid.levels == pytest.approx(constant_closed_form_levels(M), abs=1e-6)
        assert sol.loss == pytest.approx((M / (M + 1)) ** M, abs=1e-9)

    def test_two_points_constant(self):
        sol = pab.solve_constrained(ONE, 2)
        assert sol.bid.levels == pytest.approx((0.5555555555, 0.3333333333), abs=1e-6)

    def test_closed_form_helper_scales(self):
        sol = pab.constant_value_constrained(2.0, 100.0, 4)
        assert sol.loss == pytest.approx(200.0 * 0.8**4)
        assert max_loss("pab", sol.bid, MarginalValueCurve.constant(2.0, 100.0)) == pytest.approx(sol.loss)

    def test_certificate(self, rng):
        for _ in range(5):
            v = random_curve(rng)
            sol = pab.solve_constrained(v, int(rng.integers(1, 4)), starts=4)
            assert max(abs(r) for r in sol.diagnostics["regret_residuals"]) < 1e-9
            assert max_loss("pab", sol.bid, v) == pytest.approx(sol.loss, abs=1e-9)

    def test_single_point_matches_grid_search(self, rng):
        for _ in range(4):
            v = random_curve(rng)
            sol = pab.solve_constrained(v, 1, starts=4)
            n = 120
            best = math.inf
            for q in np.linspace(v.Q / n, v.Q, n):
                for b in np.linspace(0, v.top, n + 1):
                    best = min(best, max_loss("pab", StepBid((q,), (b,)), v))
            assert sol.loss <= best + 1e-9
            assert best - sol.loss <= 3 * v.top * v.Q / n

    def test_two_points_match_direct_minimization(self, rng):
        for _ in range(3):
            v = random_curve(rng)
            sol = pab.solve_constrained(v, 2, starts=4)

            def f(x):
                q1, q2, b1, b2 = x
                q1, q2 = sorted((min(max(q1, 1e-6), v.Q), min(max(q2, 1e-6), v.Q)))
                if q2 - q1 < 1e-9:
                    return max_loss("pab", StepBid((q2,), (max(b1, 0),)), v)
                b1, b2 = max(b1, b2, 0), max(min(b1, b2), 0)
                return max_loss("pab", StepBid((q1, q2), (b1, b2)), v)

            direct = min(
                optimize.minimize(f, x0, method="Nelder-Mead",
                                  options={"xatol": 1e-10, "fatol": 1e-12, "maxiter": 20000}).fun
                for x0 in ([0.3, 1.0, 0.6, 0.3], [0.5, 0.9, 0.5, 0.2], [0.2, 0.7, 0.7, 0.4])
            )
            assert sol.loss <= direct + 1e-7

    def test_loss_decreases_in_M(self):
        v = MarginalValueCurve((0.3, 0.7, 1.0), (1.0, 0.6, 0.3))
        losses = [pab.solve_constrained(v, M, starts=4).loss for M in (1, 2, 3)]
        assert losses[0] >= losses[1] >= losses[2]

    def test_constant_value_converges_to_unconstrained(self):
        losses = [pab.constant_value_constrained(1.0, 1.0, M).loss for M in (1, 2, 5, 10, 50, 500)]
        assert all(a > b for a, b in zip(losses, losses[1:]))
        assert losses[-1] == pytest.approx(math.exp(-1), abs=1e-3)

    def test_flat_optimum_takes_smallest_points(self):
        v = MarginalValueCurve((1.0, 5.0), (1.0, 1 / 6))
        sol = pab.solve_constrained(v, 1)
        assert sol.bid.points[0] == pytest.approx((1.0, 1 / 6), abs=1e-9)

    def test_merge_collapsed_points(self):
        bid, merged = pab._merge_points([0.5, 0.5, 1.0], [0.6, 0.4, 0.2], 1.0)
        assert merged == 1 and bid.quantities == (0.5, 1.0)
        bid, merged = pab._merge_points([0.5, 1.0], [0.6, 0.6], 1.0)
        assert merged == 1 and bid.points == [(1.0, 0.6)]

    def test_collapse_warns(self, monkeypatch):
        monkeypatch.setattr(pab, "_pull_down", lambda qs, loss_at, Q: [0.5, 0.5 + 1e-13])
        with pytest.warns(RuntimeWarning, match="collapsed"):
            pab.solve_constrained(ONE, 2, starts=1)


class TestUnconstrained:
    def test_constant_value(self):
        sol = pab.solve_unconstrained(ONE, 4096)
        samples = sol.diagnostics["samples"]
        assert samples[0] == pytest.approx(1 - math.exp(-1), abs=1e-8)
        assert samples[-1] == 0.0
        assert sol.loss == pytest.approx(math.exp(-1), abs=1e-7)

    def test_analytic_profile(self):
        sol = pab.solve_unconstrained(MarginalValueCurve.constant(2.0, 3.0), 2048)
        q, b = sol.diagnostics["grid"], sol.diagnostics["samples"]
        assert np.max(np.abs(b - 2.0 * (1 - np.exp((q - 3.0) / 3.0)))) < 1e-8

    def test_general_values(self, rng):
        for _ in range(5):
            v = random_curve(rng)
            sol = pab.solve_unconstrained(v, 1024)
            b = sol.diagnostics["samples"]
            assert b[-1] == 0.0
            assert 0 < b[0] < v.top
            assert np.all(np.diff(b) <= 1e-12)

    def test_rejects_coarse_grid(self):
        with pytest.raises(ValueError):
            pab.solve_unconstrained(ONE, 8)


def test_solution_json():
    d = pab.solve_multiunit(ValueVector((1.0, 0.5))).to_json()
    assert d["format"] == "pab" and d["bid"]["bids"][1] == pytest.approx(1 / 6)
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        d = pab.solve_unconstrained(ONE, 32).to_json()
    assert "samples" not in d["diagnostics"]
