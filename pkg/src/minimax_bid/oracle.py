"""Brute-force worst-case regret.

Opponents are summarized by their aggregate demand ``D(x)``, a decreasing
step function on ``[0, Q]``. A bidder who wants ``q`` units must outbid the
opponents' demand beyond ``Q - q``, so the marginal price of ``q`` units is
``D_+(Q - q)``. The best response to a known ``D`` and the bid's realized
utility (computed by actually clearing the market) give the ex post regret;
the oracle maximizes it over an explicit family of opponent demands.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import market
from .errors import DomainError
from .regret import Format, max_loss_with_argmax
from .values import MarginalValueCurve, StepBid, as_curve, as_step_bid, value_mass


@dataclass(frozen=True)
class SupplyCurve:
    """Opponents' aggregate demand as a step function on ``[0, Q]``."""

    demand: StepBid
    Q: float

    def __post_init__(self):
        if self.demand.extent > self.Q * (1 + 1e-12):
            raise DomainError("opponent demand extends beyond total supply")

    @classmethod
    def from_points(cls, points, Q: float) -> "SupplyCurve":
        pts = [(min(q, Q), p) for q, p in points if q > 0.0]
        return cls(StepBid.from_points(pts), Q)

    @classmethod
    def two_step(cls, q: float, p: float, Q: float) -> "SupplyCurve":
        """Opponents demand ``Q - q`` at price ``p`` and nothing else."""
        return cls.from_points([(Q - q, p)] if q < Q else [], Q)

    def price_to_win(self, q: float) -> float:
        if q <= 0.0:
            return 0.0
        return self.demand.right_level(max(self.Q - q, 0.0))

    def to_json(self) -> dict:
        return {"Q": self.Q, **self.demand.to_json()}


def best_response_utility(S: SupplyCurve, v: MarginalValueCurve) -> float:
    """``max_q value_mass(v, 0, q) - q * S.price_to_win(q)``.

    Between candidates the price is constant and the objective concave, so
    checking the ends of each constant-price stretch and the value
    breakpoints is exact.
    """
    v = as_curve(v)
    Q = v.Q
    cands = {0.0, Q}
    cands.update(Q - x for x in S.demand.quantities if 0.0 <= Q - x <= Q)
    cands.update(v.breakpoints)
    return max(value_mass(v, 0.0, q) - q * S.price_to_win(q) for q in cands)


def realized_utilities(bid, S: SupplyCurve, v, fmt) -> list[float]:
    """Realized utility of ``bid`` against ``S``, one value per tie resolution."""
    fmt = Format.parse(fmt)
    v = as_curve(v)
    payment = market.Payment.PAB if fmt is Format.PAB else market.Payment.UPA
    out = []
    for order in ((1, 0), (0, 1)):
        res = market.clear(
            [bid, S.demand],
            S.Q,
            market.Pricing.LAB,
            payment,
            tie_break=market.TieBreak.PRIORITY,
            priority=order,
        )
        out.append(value_mass(v, 0.0, res.allocations[0]) - res.transfers[0])
        if len(res.marginal_bidders) < 2:
            break  # no tie at the margin, the order is irrelevant
    return out


def regret_against(bid, S: SupplyCurve, v, fmt) -> float:
    """Ex post regret, taking the tie resolution least favourable to the bidder."""
    return best_response_utility(S, v) - min(realized_utilities(bid, S, v, fmt))


@dataclass
class BruteForceResult:
    loss: float
    witness: SupplyCurve
    two_step_loss: float
    random_loss: float
    evaluated: int


def _candidate_supplies(bid: StepBid, v: MarginalValueCurve, q_grid: int, p_grid: int,
                        n_random: int, seed: int):
    Q = v.Q
    top = v.top
    high = 2.0 * max(top, bid.levels[0] if bid.levels else 0.0) + 1.0
    qs = [Q * i / q_grid for i in range(q_grid + 1)]
    ps = [top * j / p_grid for j in range(p_grid + 1)] + [high]
    for q in qs:
        for p in ps:
            yield "two", SupplyCurve.two_step(q, p, Q)
    rng = np.random.default_rng(seed)
    for _ in range(n_random):
        xs = np.sort(rng.choice(q_grid + 1, size=3, replace=True)) * (Q / q_grid)
        pr = np.sort(rng.choice(ps, size=3, replace=True))[::-1]
        pts = []
        for x, p in zip(xs, pr):
            if pts and x <= pts[-1][0]:
                continue
            if x > 0.0:
                pts.append((float(x), float(p)))
        yield "random", SupplyCurve.from_points(pts, Q)


def brute_force(bid, v, fmt, q_grid: int = 64, p_grid: int = 64, *,
                n_random: int = 256, seed: int = 0) -> BruteForceResult:
    """Maximize ex post regret over two-step and random three-step opponent demands."""
    if q_grid < 8 or p_grid < 8:
        raise DomainError("grids need at least 8 points")
    bid, v = as_step_bid(bid), as_curve(v)
    fmt = Format.parse(fmt)
    best = {"two": (-np.inf, None), "random": (-np.inf, None)}
    count = 0
    for kind, S in _candidate_supplies(bid, v, q_grid, p_grid, n_random, seed):
        r = regret_against(bid, S, v, fmt)
        count += 1
        if r > best[kind][0]:
            best[kind] = (r, S)
    two, rnd = best["two"], best["random"]
    loss, witness = max(two, rnd, key=lambda t: t[0]) if rnd[1] is not None else two
    return BruteForceResult(loss, witness, two[0], rnd[0], count)


def brute_force_max_loss(bid, v, fmt, q_grid: int = 64, p_grid: int = 64, **kw) -> float:
    return brute_force(bid, v, fmt, q_grid, p_grid, **kw).loss


def default_tolerance(v, q_grid: int = 64) -> float:
    v = as_curve(v)
    return 2.0 * (v.Q / q_grid) * v.top


def verify(bid, v, fmt, tol: float | None = None, *, q_grid: int = 64, p_grid: int = 64,
           seed: int = 0) -> dict:
    """Compare the analytic maximal loss with the brute-force value."""
    bid, v = as_step_bid(bid), as_curve(v)
    fmt = Format.parse(fmt)
    if tol is None:
        tol = default_tolerance(v, q_grid)
    analytic, argmax_q, _ = max_loss_with_argmax(fmt, bid, v)
    bf = brute_force(bid, v, fmt, q_grid, p_grid, seed=seed)
    gap = analytic - bf.loss
    return {
        "format": fmt.value,
        "analytic": analytic,
        "argmax_q": argmax_q,
        "brute_force": bf.loss,
        "two_step": bf.two_step_loss,
        "random_three_step": bf.random_loss,
        "gap": gap,
        "tol": tol,
        "passed": bool(abs(gap) <= tol),
        "witness": bf.witness.to_json(),
        "supplies_evaluated": bf.evaluated,
    }
