"""Minimax-loss bids for the pay-as-bid auction.

A pay-as-bid bid minimizes maximal loss exactly when the underbidding
regret is the same at every bidpoint. The multi-unit solver walks that
condition down from the last unit, the bidpoint-constrained solver nests it
inside a search over bidpoint locations and the unconstrained solver
integrates its continuous limit.
"""

from __future__ import annotations

import logging
import math
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy import integrate, optimize

from .errors import ConvergenceError, DomainError, InconsistentBidError
from .regret import pab_under_regret
from .roots import bisect_increasing
from .values import (
    BidVector,
    MarginalValueCurve,
    StepBid,
    ValueVector,
    clipped_surplus,
    generalized_inverse,
    surplus_level,
)

log = logging.getLogger(__name__)


@dataclass
class PabSolution:
    bid: BidVector | StepBid
    loss: float
    diagnostics: dict = field(default_factory=dict)

    def to_json(self) -> dict:
        out = {"format": "pab", "loss": self.loss, "bid": self.bid.to_json()}
        out["diagnostics"] = {k: v for k, v in self.diagnostics.items()
                              if not isinstance(v, np.ndarray)}
        return out


def _pos(x: float) -> float:
    return x if x > 0.0 else 0.0


def _tail_gain(vals, k: int, b: float, b_next: float) -> float:
    """``Σ_{k'>k} [(v_k' - b)_+ - (v_k' - b_next)_+]`` with 1-based ``k``."""
    return sum(_pos(x - b) - _pos(x - b_next) for x in vals[k:])


def solve_multiunit(v: ValueVector) -> PabSolution:
    """Unique minimax-loss bid vector for ``M`` units.

    ``b_M = v_M / (M + 1)``; each earlier bid equalizes the underbidding
    regret at ``k`` units with that at ``k - 1`` units, which is a monotone
    scalar equation on ``[b_{k+1}, v_k]``.
    """
    if not isinstance(v, ValueVector):
        raise DomainError("solve_multiunit expects a ValueVector")
    vals = list(v.entries)
    M = len(vals)
    b = [0.0] * (M + 1)
    b[M - 1] = vals[M - 1] / (M + 1)
    for k in range(M - 1, 0, -1):  # 1-based unit index
        vk, nxt = vals[k - 1], b[k]

        def resid(x, k=k, vk=vk, nxt=nxt):
            return (x - nxt) * k - (vk - x) - _tail_gain(vals, k, x, nxt)

        b[k - 1] = bisect_increasing(resid, nxt, vk, tol=0.0) if vk > nxt else vk
    bids = BidVector(tuple(b[:M]), v.unit_quantity)
    # at full allocation the underbidding regret is the total payment
    loss = float(sum(bids.entries))
    return PabSolution(bids, loss, {"method": "multiunit"})


def flat_value_bids(v: ValueVector) -> list[float]:
    """Closed form valid when values are flat enough (see ``flat_value_condition``)."""
    vals = list(v.entries)
    M = len(vals)
    r = M / (M + 1)
    return [sum(r ** (j - k) * vals[j] for j in range(k, M)) / (M + 1) for k in range(M)]


def flat_value_condition(v: ValueVector) -> bool:
    vals = list(v.entries)
    M = len(vals)
    r = M / (M + 1)
    return sum(r ** j * x for j, x in enumerate(vals)) <= (M + 1) * vals[-1]


def invert_multiunit(b: BidVector) -> ValueVector:
    """Recover the values that make ``b`` the minimax-loss bid vector.

    Runs the equal-regret recursion backwards: ``v_M = (M + 1) b_M`` and each
    earlier value enters its equation linearly once later values are known.
    """
    bids = list(b.entries)
    M = len(bids)
    if any(x < 0 for x in bids):
        raise DomainError("bids must be nonnegative")
    v = [0.0] * M
    v[M - 1] = (M + 1) * bids[M - 1]
    for k in range(M - 1, 0, -1):
        bk, nxt = bids[k - 1], bids[k]
        v[k - 1] = (bk - nxt) * k + bk - _tail_gain(v, k, bk, nxt)
    for k in range(M - 1):
        if v[k] < v[k + 1] - 1e-9 * max(1.0, abs(v[k + 1])):
            raise InconsistentBidError(
                f"recovered values increase at unit {k + 1}: {v[k]:.6g} < {v[k + 1]:.6g}"
            )
    return ValueVector(tuple(max(x, 0.0) for x in _monotone(v)), b.unit_quantity)


def _monotone(xs):
    out = list(xs)
    for i in range(1, len(out)):
        out[i] = min(out[i], out[i - 1])
    return out


# ---------------------------------------------------------------------------
# bidpoint-constrained


def _chain(v: MarginalValueCurve, qs, b1: float) -> tuple[float, list[float], float]:
    """Levels with equal underbidding regret at every bidpoint, given ``b_1``.

    Returns ``(residual, levels, L)``. The residual is the would-be level
    after the last bidpoint, which must be 0; it increases with ``b_1``.
    A chain that would need to rise, or go negative, stops early and reports
    how far off it is.
    """
    Q = v.Q
    L = clipped_surplus(v, b1, 0.0, Q)
    levels = [b1]
    area = 0.0
    prev_q = 0.0
    for q in qs:
        area += (q - prev_q) * levels[-1]
        prev_q = q
        # area - q c + ∫_q^Q (v - c)_+ = L
        c, clamped = surplus_level(v, L - area, q, slope=q)
        if clamped:
            # even a zero level leaves regret below L: the chain has
            # overshot, the next level would have to be negative
            return -(L - area - clipped_surplus(v, 0.0, q, Q)) / max(q, 1e-300), levels, L
        if c > levels[-1]:
            return c - levels[-1], levels, L
        levels.append(c)
    return levels[-1], levels[:-1], L


def equal_regret_levels(v: MarginalValueCurve, qs) -> tuple[list[float], float, int]:
    """Bid levels at fixed bidpoints that equalize underbidding regret.

    Returns the levels, the common regret and the number of root iterations.
    """
    top = v.top
    it = 0

    def h(b1):
        nonlocal it
        it += 1
        return _chain(v, qs, b1)[0]

    if h(top) <= 0.0:
        raise ConvergenceError("equal-regret chain has no root below the top value")
    lo = 0.0
    if h(lo) >= 0.0:
        b1 = lo
    else:
        b1 = optimize.brentq(h, lo, top, xtol=1e-15, rtol=4 * np.finfo(float).eps, maxiter=200)
    _, levels, L = _chain(v, qs, b1)
    if len(levels) < len(qs):
        levels = levels + [0.0] * (len(qs) - len(levels))
    return levels, L, it


def _stick_break(u, Q: float) -> list[float]:
    qs = []
    prev = 0.0
    for x in u:
        prev = prev + (Q - prev) * min(max(float(x), 0.0), 1.0)
        qs.append(prev)
    return qs


def _unstick(qs, Q: float) -> np.ndarray:
    u = []
    prev = 0.0
    for q in qs:
        room = Q - prev
        u.append((q - prev) / room if room > 0 else 1.0)
        prev = q
    return np.clip(np.array(u), 0.0, 1.0)


def constant_value_constrained(value: float, Q: float, M: int) -> PabSolution:
    """Closed form for constant marginal value: evenly spaced bidpoints.

    ``b_k = (v/M) Σ_{j=k}^{M} (M/(M+1))^{j-k+1}`` and
    ``L = vQ (M/(M+1))^M``.
    """
    r = M / (M + 1)
    qs = tuple(k * Q / M for k in range(1, M + 1))
    levels = tuple(value / M * sum(r ** (j - k + 1) for j in range(k, M + 1)) for k in range(1, M + 1))
    return PabSolution(StepBid(qs, levels), value * Q * r**M, {"method": "closed-form"})


def solve_constrained(v: MarginalValueCurve, M: int, *, starts: int = 8, seed: int = 0,
                      xtol: float = 1e-10, ftol: float = 1e-14) -> PabSolution:
    """Minimax-loss bid with at most ``M`` bidpoints.

    For fixed bidpoints the equal-regret levels (and hence the loss) are
    pinned down by a scalar root in ``b_1``. Bidpoints are then chosen to
    minimize that loss by a bounded derivative-free search over a
    stick-breaking parametrization ``q_k = q_{k-1} + (Q - q_{k-1}) u_k``.
    All starts (even spacing plus ``starts - 1`` Dirichlet perturbations)
    are screened at a loose tolerance; the two best are refined. When the
    optimum is flat the smallest optimal bidpoints are returned.
    """
    if M < 1:
        raise DomainError("M must be at least 1")
    Q = v.Q
    evals = 0

    def loss_at(qs):
        nonlocal evals
        evals += 1
        try:
            return equal_regret_levels(v, qs)[1]
        except ConvergenceError:
            return math.inf

    def objective(u):
        return loss_at(_stick_break(u, Q))

    def search(x0, xt, ft):
        res = optimize.minimize(objective, x0, method="Powell", bounds=[(0.0, 1.0)] * M,
                                options={"xtol": xt, "ftol": ft, "maxfev": 4000 * M})
        return float(res.fun), np.asarray(res.x)

    rng = np.random.default_rng(seed)
    even = [k * Q / M for k in range(1, M + 1)]
    inits = [_unstick(even, Q)]
    for _ in range(max(starts, 1) - 1):
        w = rng.dirichlet(np.full(M + 1, 2.0))
        inits.append(_unstick(np.cumsum(w)[:M] * Q, Q))

    screened = sorted((search(x0, 1e-4, 1e-9) for x0 in inits), key=lambda r: r[0])
    refined = [search(x, xtol, ftol) for _, x in screened[:2]]
    best_loss = min(r[0] for r in refined)
    if not math.isfinite(best_loss):
        raise ConvergenceError("constrained pay-as-bid search found no feasible bidpoints")
    near = [_stick_break(x, Q) for f, x in refined if f <= best_loss + 1e-13 * max(1.0, best_loss)]
    qs = min(near, key=tuple)
    qs = _pull_down(qs, loss_at, Q)
    levels, loss, _ = equal_regret_levels(v, qs)
    bid, merged = _merge_points(qs, levels, Q)
    if merged:
        warnings.warn(
            f"{merged} bidpoint(s) collapsed; effective number of bidpoints is {bid.M}",
            RuntimeWarning,
            stacklevel=2,
        )
    residuals = [pab_under_regret(bid, v, q) - loss for q in [0.0, *bid.quantities]]
    return PabSolution(bid, loss, {
        "method": "constrained",
        "evaluations": evals,
        "starts": len(inits),
        "screened_losses": [r[0] for r in screened],
        "regret_residuals": residuals,
        "merged_points": merged,
    })


def _pull_down(qs, loss_at, Q: float, rel: float = 8 * np.finfo(float).eps) -> list[float]:
    """Move each bidpoint as far left as possible without raising the loss."""
    qs = list(qs)
    base = loss_at(qs)
    slack = rel * max(1.0, abs(base))
    for k in range(len(qs)):
        lo = qs[k - 1] if k else 0.0
        hi = qs[k]

        def ok(x, k=k):
            trial = qs[:k] + [x] + qs[k + 1:]
            return loss_at(trial) <= base + slack

        if hi - lo <= 1e-12 * Q:
            continue
        for _ in range(60):
            mid = 0.5 * (lo + hi)
            if ok(mid):
                hi = mid
            else:
                lo = mid
            if hi - lo <= 1e-13 * Q:
                break
        qs[k] = hi
    return qs


def _merge_points(qs, levels, Q: float, tol: float = 1e-9) -> tuple[StepBid, int]:
    pts: list[tuple[float, float]] = []
    merged = 0
    prev_q = 0.0
    for q, b in zip(qs, levels):
        q = min(q, Q)
        if q - prev_q <= tol * Q:
            merged += 1  # zero-width step, level never used
            continue
        if pts and abs(pts[-1][1] - b) <= tol * max(1.0, b):
            pts[-1] = (q, pts[-1][1])
            merged += 1
            continue
        if b <= 0.0:
            merged += 1
            continue
        pts.append((q, b))
        prev_q = q
    return StepBid.from_points(pts), merged


# ---------------------------------------------------------------------------
# unconstrained


def solve_unconstrained(v: MarginalValueCurve, grid_points: int = 4096) -> PabSolution:
    """Integrate ``b' = -(v(q) - b) / v^{-1}(b)`` backwards from ``b(Q) = 0``.

    Classical fourth-order Runge-Kutta on a uniform grid. The returned step
    bid takes the sampled value at the left end of each cell; the loss is the
    trapezoidal integral of the samples.
    """
    if grid_points < 16:
        raise DomainError("grid_points must be at least 16")
    Q = v.Q
    n = int(grid_points)
    h = Q / n
    qs = np.linspace(0.0, Q, n + 1)
    bs = np.zeros(n + 1)

    def f(q, b):
        b = max(b, 0.0)
        inv = generalized_inverse(v, b)
        if inv <= 0.0:
            return 0.0
        return -(v(min(q, Q)) - b) / inv

    b = 0.0
    for i in range(n, 0, -1):
        q = qs[i]
        k1 = f(q, b)
        k2 = f(q - h / 2, b - h / 2 * k1)
        k3 = f(q - h / 2, b - h / 2 * k2)
        k4 = f(q - h, b - h * k3)
        b = b - h / 6 * (k1 + 2 * k2 + 2 * k3 + k4)
        bs[i - 1] = b
    loss = float(integrate.trapezoid(bs, qs))
    levels = np.maximum.accumulate(bs[::-1])[::-1]  # guard tiny non-monotone wiggles
    bid = StepBid(tuple(qs[1:]), tuple(levels[:-1]))
    return PabSolution(bid, loss, {"method": "ode-rk4", "steps": n, "grid": qs, "samples": bs})
