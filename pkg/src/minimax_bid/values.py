"""Piecewise-constant marginal values and step bids.

Everything here is exact: integrals are sums of rectangles and inverses are
read off the step structure. Multi-unit vectors store per-unit amounts; a
vector with M entries over total quantity Q becomes a step function with
cells of width ``w = Q/M`` and per-quantity level ``entry / w``.
"""

from __future__ import annotations

import bisect
import json
import math
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .errors import DomainError

MONOTONE_REPAIR_TOL = 1e-12
_EDGE_TOL = 1e-12


def _repair_decreasing(levels: Sequence[float], what: str) -> tuple[float, ...]:
    out = [float(levels[0])]
    for x in levels[1:]:
        x = float(x)
        if x > out[-1]:
            if x - out[-1] > MONOTONE_REPAIR_TOL:
                raise DomainError(f"{what} must be weakly decreasing ({out[-1]!r} then {x!r})")
            x = out[-1]
        out.append(x)
    return tuple(out)


def _check_finite(xs: Iterable[float], what: str) -> None:
    for x in xs:
        if not np.isfinite(x):
            raise DomainError(f"{what} must be finite")


@dataclass(frozen=True)
class MarginalValueCurve:
    """Weakly decreasing step function ``v`` on ``[0, Q]``.

    ``breakpoints[j]`` is the right end of segment ``j`` and ``levels[j]`` its
    value; the first segment starts at 0 and the last breakpoint is ``Q``.
    """

    breakpoints: tuple[float, ...]
    levels: tuple[float, ...]

    def __post_init__(self):
        bps = tuple(float(x) for x in self.breakpoints)
        if not bps or len(bps) != len(self.levels):
            raise DomainError("need one level per segment and at least one segment")
        _check_finite(bps, "breakpoints")
        _check_finite(self.levels, "levels")
        prev = 0.0
        for x in bps:
            if x <= prev:
                raise DomainError("breakpoints must be strictly increasing and positive")
            prev = x
        levels = _repair_decreasing(self.levels, "marginal values")
        if levels[-1] <= 0.0:
            raise DomainError("marginal value on the last segment must be positive")
        object.__setattr__(self, "breakpoints", bps)
        object.__setattr__(self, "levels", levels)

    @classmethod
    def constant(cls, value: float, Q: float = 1.0) -> "MarginalValueCurve":
        return cls((Q,), (value,))

    @property
    def Q(self) -> float:
        return self.breakpoints[-1]

    @property
    def top(self) -> float:
        """``v(0)``, the highest marginal value."""
        return self.levels[0]

    def segments(self):
        """Yield ``(start, end, level)`` triples."""
        start = 0.0
        for end, lvl in zip(self.breakpoints, self.levels):
            yield start, end, lvl
            start = end

    def __call__(self, x: float) -> float:
        """Right-continuous evaluation; ``v(Q)`` is the last level."""
        j = bisect.bisect_right(self.breakpoints, x)
        return self.levels[min(j, len(self.levels) - 1)]

    def scaled(self, factor: float) -> "MarginalValueCurve":
        return MarginalValueCurve(self.breakpoints, tuple(factor * x for x in self.levels))

    def to_json(self) -> dict:
        return {
            "Q": self.Q,
            "segments": [{"upto": u, "v": lvl} for u, lvl in zip(self.breakpoints, self.levels)],
        }

    @classmethod
    def from_json(cls, obj: dict) -> "MarginalValueCurve":
        try:
            segs = obj["segments"]
            bps = [float(s["upto"]) for s in segs]
            lv = [float(s["v"]) for s in segs]
        except (KeyError, TypeError) as exc:
            raise DomainError(f"malformed value curve: {exc}") from exc
        if "Q" in obj and bps and abs(float(obj["Q"]) - bps[-1]) > _EDGE_TOL:
            raise DomainError("last segment must end at Q")
        return cls(tuple(bps), tuple(lv))


@dataclass(frozen=True)
class StepBid:
    """Decreasing step bid through points ``(q_k, b_k)``.

    The bid is ``b_k`` on ``[q_{k-1}, q_k)`` with ``q_0 = 0`` and zero from
    ``q_M`` on. Levels are per unit of quantity. An empty point list is the
    zero bid.
    """

    quantities: tuple[float, ...]
    levels: tuple[float, ...]

    def __post_init__(self):
        qs = tuple(float(x) for x in self.quantities)
        if len(qs) != len(self.levels):
            raise DomainError("need one level per bidpoint")
        _check_finite(qs, "bid quantities")
        _check_finite(self.levels, "bid levels")
        prev = 0.0
        for x in qs:
            if x <= prev:
                raise DomainError("bid quantities must be strictly increasing and positive")
            prev = x
        levels = _repair_decreasing(self.levels, "bid levels") if qs else ()
        if levels and levels[-1] < 0.0:
            if levels[-1] < -MONOTONE_REPAIR_TOL:
                raise DomainError("bid levels must be nonnegative")
            levels = tuple(max(x, 0.0) for x in levels)
        object.__setattr__(self, "quantities", qs)
        object.__setattr__(self, "levels", levels)

    @classmethod
    def from_points(cls, points: Iterable[tuple[float, float]]) -> "StepBid":
        pts = list(points)
        return cls(tuple(q for q, _ in pts), tuple(b for _, b in pts))

    @property
    def points(self) -> list[tuple[float, float]]:
        return list(zip(self.quantities, self.levels))

    @property
    def M(self) -> int:
        return len(self.quantities)

    @property
    def extent(self) -> float:
        """``q_M``, the largest quantity demanded at a positive price."""
        return self.quantities[-1] if self.quantities else 0.0

    def steps(self):
        """Yield ``(start, end, level)`` for every step."""
        start = 0.0
        for end, lvl in zip(self.quantities, self.levels):
            yield start, end, lvl
            start = end

    def right_level(self, q: float) -> float:
        """``b_+(q)``: the level on ``[q, q + dq)``."""
        j = bisect.bisect_right(self.quantities, q)
        return self.levels[j] if j < len(self.levels) else 0.0

    def left_level(self, q: float) -> float:
        """The level on ``(q - dq, q]``; ``b_1`` at ``q = 0``."""
        if q <= 0.0:
            return self.levels[0] if self.levels else 0.0
        j = bisect.bisect_left(self.quantities, q)
        return self.levels[j] if j < len(self.levels) else 0.0

    def __call__(self, q: float) -> float:
        return self.right_level(q)

    def area(self, q: float) -> float:
        """``∫_0^q b``."""
        total = 0.0
        for start, end, lvl in self.steps():
            if q <= start:
                break
            total += (min(end, q) - start) * lvl
        return total

    def snapped(self, Q: float, cells: int, up: bool = False) -> "StepBid":
        """Move every bidpoint to the grid ``{j Q / cells}``, down by default.

        Steps squeezed to zero width disappear; rounding down to 0 drops the
        point, rounding up never passes ``Q``.
        """
        if cells < 1:
            raise DomainError("cells must be at least 1")
        h = Q / cells
        pts: list[tuple[float, float]] = []
        for q, b in self.points:
            j = math.ceil(q / h - 1e-9) if up else math.floor(q / h + 1e-9)
            x = min(j, cells) * h
            if x <= 0.0:
                continue
            if pts and x <= pts[-1][0]:
                continue
            pts.append((x, b))
        return StepBid.from_points(pts)

    def to_json(self) -> dict:
        return {"points": [{"q": q, "b": b} for q, b in self.points]}

    @classmethod
    def from_json(cls, obj: dict) -> "StepBid":
        try:
            pts = [(float(p["q"]), float(p["b"])) for p in obj["points"]]
        except (KeyError, TypeError) as exc:
            raise DomainError(f"malformed step bid: {exc}") from exc
        return cls.from_points(pts)


@dataclass(frozen=True)
class _UnitVector:
    entries: tuple[float, ...]
    unit_quantity: float = 1.0

    _label = "entries"

    def __post_init__(self):
        if len(self.entries) < 1:
            raise DomainError(f"{self._label} need at least one unit")
        _check_finite(self.entries, self._label)
        if not self.unit_quantity > 0:
            raise DomainError("unit_quantity must be positive")
        ent = _repair_decreasing(self.entries, self._label)
        if ent[-1] < 0.0:
            if ent[-1] < -MONOTONE_REPAIR_TOL:
                raise DomainError(f"{self._label} must be nonnegative")
            ent = tuple(max(x, 0.0) for x in ent)
        object.__setattr__(self, "entries", ent)
        object.__setattr__(self, "unit_quantity", float(self.unit_quantity))

    @property
    def M(self) -> int:
        return len(self.entries)

    @property
    def Q(self) -> float:
        return self.M * self.unit_quantity

    def __len__(self):
        return len(self.entries)

    def __getitem__(self, k):
        return self.entries[k]

    def as_array(self) -> np.ndarray:
        return np.asarray(self.entries, dtype=float)

    def grid(self) -> list[float]:
        """Cell right ends ``k * Q / M``."""
        return [k * self.unit_quantity for k in range(1, self.M + 1)]


class ValueVector(_UnitVector):
    """Per-unit values ``v_1 >= ... >= v_M >= 0`` on a uniform grid."""

    _label = "values"

    def to_curve(self) -> MarginalValueCurve:
        w = self.unit_quantity
        return _merge_curve(self.grid(), [x / w for x in self.entries])

    @classmethod
    def from_curve(cls, v: MarginalValueCurve, M: int) -> "ValueVector":
        """Cell masses of ``v`` on the M-cell grid."""
        if M < 1:
            raise DomainError("M must be at least 1")
        w = v.Q / M
        entries = [value_mass(v, (k - 1) * w, min(k * w, v.Q)) for k in range(1, M + 1)]
        return cls(tuple(entries), w)

    def to_json(self) -> dict:
        return {"values": list(self.entries), "unit_quantity": self.unit_quantity}


class BidVector(_UnitVector):
    """Per-unit bids ``b_1 >= ... >= b_M >= 0``; ``b_{M+1} = 0`` is implicit."""

    _label = "bids"

    def to_step_bid(self) -> StepBid:
        w = self.unit_quantity
        return StepBid(tuple(self.grid()), tuple(x / w for x in self.entries))

    def to_json(self) -> dict:
        return {"bids": list(self.entries), "unit_quantity": self.unit_quantity}


def _merge_curve(bps: Sequence[float], levels: Sequence[float]) -> MarginalValueCurve:
    # equal neighbouring levels collapse into one segment
    out_b: list[float] = []
    out_l: list[float] = []
    for x, lvl in zip(bps, levels):
        if out_l and lvl == out_l[-1]:
            out_b[-1] = x
        else:
            out_b.append(x)
            out_l.append(lvl)
    return MarginalValueCurve(tuple(out_b), tuple(out_l))


def as_curve(v) -> MarginalValueCurve:
    if isinstance(v, MarginalValueCurve):
        return v
    if isinstance(v, ValueVector):
        return v.to_curve()
    raise TypeError(f"expected a value curve or vector, got {type(v).__name__}")


def as_step_bid(b) -> StepBid:
    if isinstance(b, StepBid):
        return b
    if isinstance(b, BidVector):
        return b.to_step_bid()
    raise TypeError(f"expected a step bid or bid vector, got {type(b).__name__}")


def _check_interval(v: MarginalValueCurve, a: float, b: float) -> tuple[float, float]:
    Q = v.Q
    if not (-_EDGE_TOL <= a <= b + _EDGE_TOL and b <= Q * (1 + _EDGE_TOL) + _EDGE_TOL):
        raise DomainError(f"interval [{a}, {b}] outside [0, {Q}]")
    a = min(max(a, 0.0), Q)
    return a, min(max(b, a), Q)


def value_mass(v: MarginalValueCurve, a: float, b: float) -> float:
    """``∫_a^b v(x) dx``."""
    return clipped_surplus(v, 0.0, a, b)


def clipped_surplus(v: MarginalValueCurve, p: float, a: float, b: float) -> float:
    """``∫_a^b (v(x) - p)_+ dx``."""
    if p < 0.0:
        raise DomainError("price must be nonnegative")
    a, b = _check_interval(v, a, b)
    total = 0.0
    for start, end, lvl in v.segments():
        if end <= a:
            continue
        if start >= b or lvl <= p:
            break
        total += (min(end, b) - max(start, a)) * (lvl - p)
    return total


def generalized_inverse(v: MarginalValueCurve, p: float) -> float:
    """``sup{x in [0, Q] : v(x) > p}``, or 0 when no value exceeds ``p``."""
    if p < 0.0:
        raise DomainError("price must be nonnegative")
    x = 0.0
    for _, end, lvl in v.segments():
        if lvl <= p:
            break
        x = end
    return x


def surplus_level(
    v: MarginalValueCurve, target: float, a: float = 0.0, slope: float = 0.0
) -> tuple[float, bool]:
    """Solve ``∫_a^Q (v - c)_+ dx - slope * c = target`` for ``c >= 0``.

    The left side is continuous, piecewise linear and strictly decreasing in
    ``c`` while positive (``slope >= 0``), so the root is found by locating the
    linear piece that brackets ``target``. Returns ``(c, clamped)``; when even
    ``c = 0`` leaves the left side below ``target`` the result is 0 with
    ``clamped`` set. With ``slope = 0`` and ``target <= 0`` the smallest root,
    ``v(a)``, is returned.
    """
    if slope < 0.0:
        raise DomainError("slope must be nonnegative")
    a, _ = _check_interval(v, a, v.Q)
    widths: list[float] = []
    lvls: list[float] = []
    for start, end, lvl in v.segments():
        if end <= a:
            continue
        widths.append(end - max(start, a))
        lvls.append(lvl)
    # walk levels from the top; on [lvls[j+1], lvls[j]] the active mass is
    # the first j+1 segments and the left side is mass_value - (width + slope) c
    width = 0.0
    mass = 0.0
    top = lvls[0] if lvls else 0.0
    if target <= -slope * top:
        if slope > 0.0:
            return -target / slope, False
        return top, False
    for j, (w, lvl) in enumerate(zip(widths, lvls)):
        width += w
        mass += w * lvl
        nxt = lvls[j + 1] if j + 1 < len(lvls) else 0.0
        if mass - (width + slope) * nxt >= target:
            c = (mass - target) / (width + slope)
            return min(max(c, nxt), lvl), False
    return 0.0, True
