"""Uniform pricing at the first rejected bid (multi-unit only).

When the price is the highest losing bid, winning ``k`` units costs at most
the bid on unit ``k + 1``. Overbidding regret at ``k`` units is therefore
``k b_{k+1}`` and underbidding regret is the surplus of units beyond ``k``
above ``b_{k+1}``. Bids are assumed not to exceed values.
"""

from __future__ import annotations

from .errors import DomainError
from .regret import ConditionalRegret
from .roots import bisect_increasing
from .values import BidVector, ValueVector


def _check(b: BidVector, v: ValueVector) -> None:
    if len(b) != len(v):
        raise DomainError("bid and value vectors differ in length")
    for k, (x, y) in enumerate(zip(b.entries, v.entries), start=1):
        if x > y + 1e-12:
            raise DomainError(f"bid on unit {k} exceeds its value")


def frb_regrets(b: BidVector, v: ValueVector, k: int) -> ConditionalRegret:
    """Regrets when winning ``k`` units, ``0 <= k <= M - 1``."""
    _check(b, v)
    M = len(b)
    if not 0 <= k <= M - 1:
        raise DomainError(f"units won must be in [0, {M - 1}]")
    nxt = b.entries[k]
    over = k * nxt
    under = sum(x - nxt for x in v.entries[k:] if x > nxt)
    return ConditionalRegret(float(k), over, under)


def max_loss(b: BidVector, v: ValueVector) -> float:
    return max(frb_regrets(b, v, k).max for k in range(len(b)))


def solve_frb(v: ValueVector) -> BidVector:
    """Conditional-regret-minimizing bid: ``b_1 = v_1`` and, for ``k >= 1``,
    ``k b_{k+1} = Σ_{k' > k} (v_k' - b_{k+1})_+``."""
    vals = list(v.entries)
    bids = [vals[0]]
    for k in range(1, len(vals)):
        def resid(x, k=k):
            return k * x - sum(y - x for y in vals[k:] if y > x)

        bids.append(bisect_increasing(resid, 0.0, vals[k], tol=0.0))
    return BidVector(tuple(bids), v.unit_quantity)


def flat_value_bids(v: ValueVector) -> list[float]:
    """``b_1 = v_1`` and ``b_k = Σ_{k' >= k} v_k' / M`` for ``k >= 2``."""
    vals = list(v.entries)
    M = len(vals)
    return [vals[0]] + [sum(vals[k:]) / M for k in range(1, M)]


def flat_value_condition(v: ValueVector) -> bool:
    vals = list(v.entries)
    M = len(vals)
    return M < 2 or (M - 1) * vals[-1] >= (M - 2) * vals[1]
