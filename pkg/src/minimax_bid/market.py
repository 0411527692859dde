"""Multi-unit auction clearing with step bids.

Supply ``Q`` is fixed. The market price is either the lowest accepted bid
(LAB) or the highest rejected bid (FRB). Bids strictly above the price are
filled; the remaining quantity is rationed among bids exactly at the price.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import DomainError
from .values import StepBid, as_step_bid


class Pricing(str, enum.Enum):
    LAB = "lab"
    FRB = "frb"


class Payment(str, enum.Enum):
    PAB = "pab"
    UPA = "upa"


class TieBreak(str, enum.Enum):
    PRO_RATA = "pro-rata"
    PRIORITY = "priority"
    RANDOM = "random"


@dataclass(frozen=True)
class ClearingOutcome:
    price: float
    allocations: tuple[float, ...]
    transfers: tuple[float, ...]
    pricing_rule: Pricing
    payment_rule: Payment
    lab_price: float = 0.0
    frb_price: float = 0.0
    unallocated: float = 0.0
    marginal_bidders: tuple[int, ...] = ()

    def to_json(self) -> dict:
        return {
            "price": self.price,
            "lab_price": self.lab_price,
            "frb_price": self.frb_price,
            "allocations": list(self.allocations),
            "transfers": list(self.transfers),
            "revenue": revenue(self),
            "unallocated": self.unallocated,
            "pricing_rule": self.pricing_rule.value,
            "payment_rule": self.payment_rule.value,
        }


def revenue(outcome: ClearingOutcome) -> float:
    return float(sum(outcome.transfers))


def _build_book(bids: Sequence[StepBid]) -> list[tuple[float, list[float]]]:
    """Distinct price levels, descending, with each bidder's quantity there."""
    per_level: dict[float, list[float]] = {}
    n = len(bids)
    for i, bid in enumerate(bids):
        for start, end, lvl in bid.steps():
            if end <= start:
                continue
            row = per_level.get(lvl)
            if row is None:
                row = per_level[lvl] = [0.0] * n
            row[i] += end - start
    return [(lvl, per_level[lvl]) for lvl in sorted(per_level, reverse=True)]


def clear(
    bids: Sequence,
    Q: float,
    pricing: Pricing | str = Pricing.LAB,
    payment: Payment | str = Payment.PAB,
    *,
    tie_break: TieBreak | str = TieBreak.PRO_RATA,
    priority: Sequence[int] | None = None,
    rng: np.random.Generator | None = None,
) -> ClearingOutcome:
    """Clear ``bids`` against supply ``Q``.

    Parameters
    ----------
    bids : sequence of StepBid or BidVector
    Q : total supply
    pricing : ``"lab"`` or ``"frb"``
    payment : ``"pab"`` (each pays its bid) or ``"upa"`` (all pay the price)
    tie_break : how quantity at the marginal level is rationed.
        ``"priority"`` fills bidders in the order given by ``priority``;
        ``"random"`` draws that order from ``rng``.

    When aggregate demand falls short of ``Q`` every bid is filled and the
    price is 0.
    """
    pricing, payment, tie_break = Pricing(pricing), Payment(payment), TieBreak(tie_break)
    if Q <= 0:
        raise DomainError("supply must be positive")
    bids = [as_step_bid(b) for b in bids]
    n = len(bids)
    if n == 0:
        return ClearingOutcome(0.0, (), (), pricing, payment, unallocated=Q)

    book = _build_book(bids)
    alloc = [0.0] * n
    filled = 0.0
    lab = frb = 0.0
    marginal: tuple[int, ...] = ()
    unallocated = 0.0
    for j, (lvl, row) in enumerate(book):
        level_total = sum(row)
        if filled + level_total >= Q:
            lab = lvl
            if filled + level_total > Q:
                frb = lvl
            elif j + 1 < len(book):
                frb = book[j + 1][0]
            marginal = tuple(i for i, x in enumerate(row) if x > 0.0)
            share = _ration(row, Q - filled, tie_break, priority, rng)
            alloc = [a + s for a, s in zip(alloc, share)]
            break
        alloc = [a + x for a, x in zip(alloc, row)]
        filled += level_total
    else:
        unallocated = Q - filled

    price = lab if pricing is Pricing.LAB else frb
    if payment is Payment.PAB:
        transfers = tuple(b.area(q) for b, q in zip(bids, alloc))
    else:
        transfers = tuple(price * q for q in alloc)
    return ClearingOutcome(
        float(price),
        tuple(alloc),
        transfers,
        pricing,
        payment,
        lab_price=float(lab),
        frb_price=float(frb),
        unallocated=float(unallocated),
        marginal_bidders=marginal,
    )


def _ration(row: list[float], residual: float, tie_break, priority, rng) -> list[float]:
    total = sum(row)
    if residual >= total:
        return list(row)
    if tie_break is TieBreak.PRO_RATA:
        return [x * (residual / total) for x in row]
    if tie_break is TieBreak.RANDOM:
        if rng is None:
            raise DomainError("random tie-breaking needs a seeded generator")
        order = [int(i) for i in rng.permutation(len(row))]
    else:
        order = list(priority) if priority is not None else list(range(len(row)))
        order += [i for i in range(len(row)) if i not in order]
    out = [0.0] * len(row)
    for i in order:
        take = min(row[i], residual)
        out[i] = take
        residual -= take
        if residual <= 0.0:
            break
    return out
