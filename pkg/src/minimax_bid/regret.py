"""Conditional regret and maximal loss of a bid.

For a bidder who ends up winning quantity ``q``:

* pay-as-bid overbidding regret is the payment ``∫_0^q b``;
* pay-as-bid underbidding regret is ``∫_0^q (b - b_+(q)) + ∫_q^Q (v - b_+(q))_+``;
* last-accepted-bid overbidding regret is ``q * b(q-)``;
* last-accepted-bid underbidding regret is ``∫_q^Q (v - b_+(q))_+``.

All of these are monotone between bidpoints and value breakpoints, so the
supremum over ``q`` is an exact maximum over a finite candidate set.
"""

from __future__ import annotations

import enum
from dataclasses import asdict, dataclass

from .errors import DomainError
from .values import (
    MarginalValueCurve,
    StepBid,
    as_curve,
    as_step_bid,
    clipped_surplus,
)


class Format(str, enum.Enum):
    PAB = "pab"
    LAB = "lab"

    @classmethod
    def parse(cls, name) -> "Format":
        if isinstance(name, Format):
            return name
        key = str(name).lower()
        if key in ("pab", "discriminatory"):
            return cls.PAB
        if key in ("lab", "upa", "uniform"):
            return cls.LAB
        raise DomainError(f"unknown auction format {name!r}")


@dataclass(frozen=True)
class ConditionalRegret:
    q: float
    over: float
    under: float

    @property
    def max(self) -> float:
        return max(self.over, self.under)

    def to_json(self) -> dict:
        d = asdict(self)
        d["max"] = self.max
        return d


def _check_q(v: MarginalValueCurve, q: float) -> float:
    if q < -1e-12 or q > v.Q * (1 + 1e-12) + 1e-12:
        raise DomainError(f"quantity {q} outside [0, {v.Q}]")
    return min(max(q, 0.0), v.Q)


def _right_level(bid: StepBid, q: float, Q: float) -> float:
    return 0.0 if q >= Q else bid.right_level(q)


def pab_over_regret(bid, q: float) -> float:
    return as_step_bid(bid).area(q)


def pab_under_regret(bid, v, q: float) -> float:
    bid, v = as_step_bid(bid), as_curve(v)
    q = _check_q(v, q)
    bp = _right_level(bid, q, v.Q)
    return bid.area(q) - q * bp + clipped_surplus(v, bp, q, v.Q)


def lab_regrets(bid, v, q: float, *, left: bool = True) -> ConditionalRegret:
    """Regrets when winning exactly ``q`` under last-accepted-bid pricing.

    Winning ``q`` at a bidpoint means the price is set by the step that ends
    there, so overbidding uses the level to the left of ``q`` (``left=False``
    uses the level to the right instead). Underbidding always uses ``b_+(q)``.
    """
    bid, v = as_step_bid(bid), as_curve(v)
    q = _check_q(v, q)
    lvl = bid.left_level(q) if left else bid.right_level(q)
    over = q * lvl
    under = clipped_surplus(v, _right_level(bid, q, v.Q), q, v.Q)
    return ConditionalRegret(q, over, under)


def critical_quantities(bid: StepBid, v: MarginalValueCurve) -> list[float]:
    qs = {0.0, v.Q}
    qs.update(q for q in bid.quantities if q <= v.Q)
    qs.update(v.breakpoints)
    return sorted(qs)


def regret_profile(fmt, bid, v) -> list[ConditionalRegret]:
    """Conditional regrets at every critical quantity."""
    fmt = Format.parse(fmt)
    bid, v = as_step_bid(bid), as_curve(v)
    if bid.extent > v.Q * (1 + 1e-12):
        raise DomainError("bid extends beyond total quantity")
    out = []
    for q in critical_quantities(bid, v):
        if fmt is Format.PAB:
            out.append(ConditionalRegret(q, bid.area(q), pab_under_regret(bid, v, q)))
        else:
            out.append(lab_regrets(bid, v, q))
    return out


def max_loss_with_argmax(fmt, bid, v) -> tuple[float, float, list[ConditionalRegret]]:
    fmt = Format.parse(fmt)
    profile = regret_profile(fmt, bid, v)
    # pay-as-bid overbidding regret peaks at Q where it equals underbidding
    key = (lambda r: r.under) if fmt is Format.PAB else (lambda r: r.max)
    best = max(profile, key=key)
    return key(best), best.q, profile


def max_loss(fmt, bid, v) -> float:
    """Worst-case loss of ``bid`` for value ``v`` under ``fmt``."""
    return max_loss_with_argmax(fmt, bid, v)[0]
