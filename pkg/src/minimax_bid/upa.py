"""Minimax-loss bids for the uniform-price (last-accepted-bid) auction.

Under uniform pricing the bid on a step only matters for two regrets: the
overbidding regret at the step's right end, ``q_k b_k``, and the
underbidding regret at its left end, ``∫_{q_{k-1}}^Q (v - b_k)_+``. A bid
keeps both below ``L`` exactly when it lies between two iso-loss curves:
the hyperbola ``c̄(q) = L / q`` above and the level ``c̲(q)`` solving
``∫_q^Q (v - c̲)_+ = L`` below.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import optimize

from .errors import ConvergenceError, DomainError
from .roots import bisect_decreasing, bisect_increasing
from .values import (
    BidVector,
    MarginalValueCurve,
    StepBid,
    ValueVector,
    clipped_surplus,
    surplus_level,
    value_mass,
)


def _tail_surplus(vals, k: int, b: float) -> float:
    """``Σ_{k' >= k} (v_k' - b)_+`` with 1-based ``k``."""
    return sum(x - b for x in vals[k - 1:] if x > b)


def solve_cross_conditional(v: ValueVector) -> BidVector:
    """Bid equating underbidding regret at ``k - 1`` units with overbidding regret at ``k``.

    Each ``b_k`` solves ``k b = Σ_{k' >= k} (v_k' - b)_+`` on its own.
    """
    vals = list(v.entries)
    top = vals[0]
    bids = []
    for k in range(1, len(vals) + 1):
        bids.append(bisect_increasing(lambda b, k=k: k * b - _tail_surplus(vals, k, b),
                                      0.0, top, tol=0.0))
    return BidVector(tuple(bids), v.unit_quantity)


def flat_value_bids(v: ValueVector) -> list[float]:
    """``b_k = Σ_{k' >= k} v_k' / (M + 1)``, the cross-conditional bid when values are flat."""
    vals = list(v.entries)
    M = len(vals)
    return [sum(vals[k:]) / (M + 1) for k in range(M)]


@dataclass(frozen=True)
class MinimaxBand:
    lower: tuple[float, ...]
    upper: tuple[float, ...]
    loss: float
    unit_quantity: float = 1.0

    def contains(self, b: BidVector, tol: float = 1e-9) -> bool:
        return all(lo - tol <= x <= hi + tol for lo, x, hi in zip(self.lower, b.entries, self.upper))

    def to_json(self) -> dict:
        return {
            "loss": self.loss,
            "unit_quantity": self.unit_quantity,
            "band": [{"lo": lo, "hi": hi} for lo, hi in zip(self.lower, self.upper)],
        }


def _smallest_clearing_bid(vals, k: int, L: float) -> float:
    """Smallest ``b >= 0`` with ``Σ_{k' >= k} (v_k' - b)_+ <= L``."""
    if _tail_surplus(vals, k, 0.0) <= L:
        return 0.0
    return bisect_decreasing(lambda b: _tail_surplus(vals, k, b) - L, 0.0, vals[k - 1], tol=0.0)


def multiunit_minimax_band(v: ValueVector) -> MinimaxBand:
    """Minimax loss and the per-unit interval of minimax-loss bids.

    Bidding ``b_k`` caps the overbidding regret at ``k`` units by ``k b_k``
    and the underbidding regret at ``k - 1`` units by the surplus left above
    ``b_k``. The minimax loss is the smallest ``L`` for which every unit has
    a bid meeting both caps; the band collects those bids.
    """
    vals = list(v.entries)
    M = len(vals)

    def slack(L):
        return max(_smallest_clearing_bid(vals, k, L) - L / k for k in range(1, M + 1))

    total = sum(vals)
    L = bisect_decreasing(slack, 0.0, total, tol=0.0) if total > 0 else 0.0
    lower = [_smallest_clearing_bid(vals, k, L) for k in range(1, M + 1)]
    upper = [L / k for k in range(1, M + 1)]
    for k in range(M - 2, -1, -1):
        lower[k] = max(lower[k], lower[k + 1])
    lower = [min(lo, hi) for lo, hi in zip(lower, upper)]
    return MinimaxBand(tuple(lower), tuple(upper), L, v.unit_quantity)


@dataclass(frozen=True)
class IsoLossCurves:
    loss: float
    q: np.ndarray
    upper: np.ndarray
    lower: np.ndarray
    clamped: np.ndarray

    def rows(self):
        for q, hi, lo in zip(self.q, self.upper, self.lower):
            yield float(q), float(hi), float(lo)


def lower_iso_level(v: MarginalValueCurve, q: float, L: float) -> tuple[float, bool]:
    """``c̲(q; L)``: the level whose surplus beyond ``q`` equals ``L`` (0 if unreachable)."""
    return surplus_level(v, L, q)


def iso_loss(v: MarginalValueCurve, L: float, grid: int = 256) -> IsoLossCurves:
    if L <= 0:
        raise DomainError("loss level must be positive")
    if L > value_mass(v, 0.0, v.Q) * (1 + 1e-12):
        raise DomainError("loss level exceeds total value")
    qs = np.linspace(0.0, v.Q, int(grid) + 1)
    with np.errstate(divide="ignore"):
        upper = np.where(qs > 0, L / np.where(qs > 0, qs, 1.0), np.inf)
    lower = np.empty_like(qs)
    clamped = np.zeros(qs.shape, dtype=bool)
    for i, q in enumerate(qs):
        lower[i], clamped[i] = lower_iso_level(v, float(q), L)
    return IsoLossCurves(L, qs, upper, lower, clamped)


@dataclass
class UpaSolution:
    bid: StepBid | BidVector
    loss: float
    diagnostics: dict = field(default_factory=dict)

    def __iter__(self):
        yield self.bid
        yield self.loss

    def to_json(self) -> dict:
        out = {"format": "upa", "loss": self.loss, "bid": self.bid.to_json()}
        out["diagnostics"] = {k: x for k, x in self.diagnostics.items()
                              if not isinstance(x, np.ndarray)}
        return out


def staircase(v: MarginalValueCurve, L: float, M: int) -> tuple[list[float], list[float]]:
    """Bidpoints and levels alternating between the two iso-loss curves.

    Each level sits on the lower curve at the previous bidpoint and each
    bidpoint on the upper curve at that level. Stops early once the lower
    curve reaches 0.
    """
    Q = v.Q
    qs: list[float] = []
    bs: list[float] = []
    prev = 0.0
    for _ in range(M):
        b, clamped = lower_iso_level(v, prev, L)
        if clamped or b <= 0.0:
            break
        q = min(Q, max(prev, L / b))
        qs.append(q)
        bs.append(b)
        prev = q
        if q >= Q:
            break
    return qs, bs


def _staircase_residual(v: MarginalValueCurve, L: float, M: int) -> float:
    qs, _ = staircase(v, L, M)
    end = qs[-1] if qs else 0.0
    return clipped_surplus(v, 0.0, end, v.Q) - L


def solve_constrained(v: MarginalValueCurve, M: int, *, rtol: float = 1e-13) -> UpaSolution:
    """Minimax-loss bid with at most ``M`` bidpoints.

    Bisects on ``L`` until the staircase leaves exactly ``L`` of surplus
    beyond its last bidpoint.
    """
    if M < 1:
        raise DomainError("M must be at least 1")
    total = value_mass(v, 0.0, v.Q)
    lo, hi = 0.0, total
    if _staircase_residual(v, lo, M) <= 0.0:
        raise ConvergenceError("staircase residual not positive at zero loss")
    it = 0
    while hi - lo > rtol * total and it < 200:
        mid = 0.5 * (lo + hi)
        r = _staircase_residual(v, mid, M)
        if r > 0.0:
            lo = mid
        else:
            hi = mid
        it += 1
    L = hi
    qs, bs = staircase(v, L, M)
    pts = []
    for q, b in zip(qs, bs):
        if pts and q <= pts[-1][0]:
            continue  # capped at Q
        pts.append((q, b))
    bid = StepBid.from_points(pts)
    cert = staircase_certificate(v, bid, L)
    return UpaSolution(bid, L, {
        "method": "staircase",
        "iterations": it,
        "residual": _staircase_residual(v, L, M),
        "effective_points": bid.M,
        "certificate": cert,
    })


def staircase_certificate(v: MarginalValueCurve, bid: StepBid, L: float) -> dict:
    """Deviations of each regret condition from ``L``."""
    over = [q * b - L for q, b in bid.points if q < v.Q]
    under = [clipped_surplus(v, b, start, v.Q) - L for start, _, b in bid.steps()]
    tail = clipped_surplus(v, 0.0, bid.extent, v.Q) - L
    return {"over": over, "under": under, "tail": tail}


# ---------------------------------------------------------------------------
# unconstrained


def cross_bid_at(v: MarginalValueCurve, q: float) -> float:
    """``b`` solving ``q b = ∫_q^Q (v - b)_+``."""
    return bisect_increasing(lambda b: q * b - clipped_surplus(v, b, q, v.Q), 0.0, v.top, tol=0.0)


def cross_bid_samples(v: MarginalValueCurve, grid: int = 1024) -> tuple[np.ndarray, np.ndarray]:
    if grid < 16:
        raise DomainError("grid must be at least 16")
    qs = np.linspace(0.0, v.Q, int(grid) + 1)
    bs = np.array([cross_bid_at(v, float(q)) for q in qs])
    return qs, bs


def solve_unconstrained_cross(v: MarginalValueCurve, grid: int = 1024) -> StepBid:
    """Step sampling of the cross-conditional bid; each cell takes its left-end value."""
    qs, bs = cross_bid_samples(v, grid)
    pts = [(float(q), float(b)) for q, b in zip(qs[1:], bs[:-1]) if b > 0.0]
    return StepBid.from_points(pts)


def unconstrained_minimax(v: MarginalValueCurve, grid: int = 1024):
    """Minimax loss without bidpoint limits.

    Returns ``(L*, q̂, curves)``: ``L*`` is the largest overbidding regret of
    the cross-conditional bid, ``max_q q b(q)``, attained at ``q̂`` where the
    two iso-loss curves touch.
    """
    qs, bs = cross_bid_samples(v, grid)
    prod = qs * bs
    j = int(np.argmax(prod))
    a, b = qs[max(j - 1, 0)], qs[min(j + 1, len(qs) - 1)]
    res = optimize.minimize_scalar(lambda q: -q * cross_bid_at(v, q), bounds=(a, b),
                                   method="bounded", options={"xatol": 1e-12 * v.Q})
    if -res.fun >= prod[j]:
        L, qhat = float(-res.fun), float(res.x)
    else:
        L, qhat = float(prod[j]), float(qs[j])
    if not math.isfinite(L) or L <= 0:
        raise ConvergenceError("cross-conditional bid gives no positive loss")
    return L, qhat, iso_loss(v, L, grid)
