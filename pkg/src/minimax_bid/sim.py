"""Monte Carlo revenue and loss studies with constant marginal values.

Each bidder has a constant marginal value ``v0`` drawn from a truncated
lognormal. With constant values the minimax-loss bids scale linearly in
``v0``, so each (format, M) bid is solved once for ``v0 = 1`` and rescaled.
"""

from __future__ import annotations

import csv
import itertools
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Iterable, Sequence

import numpy as np
from scipy import optimize, stats

from . import market, pab, upa
from .errors import ConfigError
from .values import MarginalValueCurve, StepBid

THREADS_ENV = "MINIMAX_BID_THREADS"


@dataclass(frozen=True)
class TruncatedLognormal:
    """Lognormal with shape ``sigma`` truncated to ``[low, high]``.

    The location is solved so that the truncated mean equals ``mean``.
    """

    low: float = 0.5
    high: float = 2.0
    mean: float = 1.0
    sigma: float = 0.5

    def __post_init__(self):
        if not 0 < self.low < self.high:
            raise ConfigError("support must satisfy 0 < low < high")
        if not self.low < self.mean < self.high:
            raise ConfigError("target mean must lie strictly inside the support")
        if self.sigma <= 0:
            raise ConfigError("sigma must be positive")

    def truncated_mean(self, mu: float) -> float:
        return _truncated_mean(mu, self.low, self.high, self.sigma)

    @property
    def mu(self) -> float:
        return _solve_mu(self.low, self.high, self.mean, self.sigma)

    def acceptance(self) -> float:
        mu, s = self.mu, self.sigma
        return float(stats.norm.cdf((math.log(self.high) - mu) / s)
                     - stats.norm.cdf((math.log(self.low) - mu) / s))


def _truncated_mean(mu: float, low: float, high: float, s: float) -> float:
    a, b = math.log(low), math.log(high)
    mass = stats.norm.cdf((b - mu) / s) - stats.norm.cdf((a - mu) / s)
    if mass <= 0:
        return low if mu < a else high
    part = stats.norm.cdf((b - mu - s * s) / s) - stats.norm.cdf((a - mu - s * s) / s)
    return math.exp(mu + s * s / 2) * part / mass


@lru_cache(maxsize=64)
def _solve_mu(low: float, high: float, mean: float, sigma: float) -> float:
    lo, hi = math.log(low) - 10 * sigma, math.log(high) + 10 * sigma
    return optimize.brentq(lambda m: _truncated_mean(m, low, high, sigma) - mean, lo, hi, xtol=1e-14)


def sample_truncated_lognormal(dist: TruncatedLognormal, rng: np.random.Generator,
                               size=None) -> np.ndarray | float:
    """Rejection sampling from the untruncated lognormal."""
    n = 1 if size is None else int(np.prod(size))
    mu = dist.mu
    out = np.empty(n)
    filled = 0
    while filled < n:
        need = n - filled
        batch = rng.lognormal(mu, dist.sigma, size=max(16, int(need / 0.4) + 16))
        ok = batch[(batch >= dist.low) & (batch <= dist.high)][:need]
        out[filled:filled + ok.size] = ok
        filled += ok.size
    if size is None:
        return float(out[0])
    return out.reshape(size)


@dataclass(frozen=True)
class SimConfig:
    n_bidders: tuple[int, ...] = (2, 5, 10)
    M: tuple[int, ...] = (1, 2, 3, 4, 5)
    Q: float = 100.0
    values: TruncatedLognormal = field(default_factory=TruncatedLognormal)
    draws: int = 10_000
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "n_bidders", _as_tuple(self.n_bidders))
        object.__setattr__(self, "M", _as_tuple(self.M))
        if self.draws < 1:
            raise ConfigError("draws must be at least 1")
        if self.Q <= 0:
            raise ConfigError("Q must be positive")
        if any(n < 1 for n in self.n_bidders) or any(m < 1 for m in self.M):
            raise ConfigError("bidder counts and M must be positive")


def _as_tuple(x) -> tuple[int, ...]:
    if isinstance(x, Iterable):
        return tuple(int(i) for i in x)
    return (int(x),)


@lru_cache(maxsize=256)
def unit_value_bid(fmt: str, M: int, Q: float) -> StepBid:
    """Constrained minimax-loss bid for constant marginal value 1."""
    if fmt == "pab":
        return pab.constant_value_constrained(1.0, Q, M).bid
    if fmt == "upa":
        return upa.solve_constrained(MarginalValueCurve.constant(1.0, Q), M).bid
    raise ConfigError(f"unknown format {fmt!r}")


def scaled_bid(fmt: str, M: int, Q: float, v0: float) -> StepBid:
    base = unit_value_bid(fmt, M, Q)
    return StepBid(base.quantities, tuple(v0 * b for b in base.levels))


def worker_count(default: int | None = None) -> int:
    env = os.environ.get(THREADS_ENV)
    if env:
        try:
            return max(1, int(env))
        except ValueError as exc:
            raise ConfigError(f"{THREADS_ENV} must be an integer") from exc
    return default if default is not None else max(1, os.cpu_count() or 1)


def _run_cell(args) -> dict:
    n, M, Q, dist, draws, seed_seq = args
    rng = np.random.default_rng(seed_seq)
    values = sample_truncated_lognormal(dist, rng, size=(draws, n))
    rev_pab = np.empty(draws)
    rev_upa = np.empty(draws)
    for d in range(draws):
        row = values[d]
        for fmt, out in (("pab", rev_pab), ("upa", rev_upa)):
            bids = [scaled_bid(fmt, M, Q, float(x)) for x in row]
            res = market.clear(bids, Q, market.Pricing.LAB, fmt)
            out[d] = market.revenue(res)
    return {
        "n": n,
        "M": M,
        "rev_pab_mean": float(np.mean(rev_pab)),
        "rev_upa_mean": float(np.mean(rev_upa)),
        "share_upa_higher": float(np.mean(rev_upa > rev_pab)),
    }


def run_revenue_study(cfg: SimConfig, workers: int | None = None) -> list[dict]:
    """Mean revenue per format and the share of draws where uniform pricing earns more.

    Every (n, M) cell gets its own random stream spawned from ``cfg.seed``,
    so results do not depend on the number of workers.
    """
    cells = list(itertools.product(cfg.n_bidders, cfg.M))
    seeds = np.random.SeedSequence(cfg.seed).spawn(len(cells))
    tasks = [(n, M, cfg.Q, cfg.values, cfg.draws, s) for (n, M), s in zip(cells, seeds)]
    workers = min(worker_count() if workers is None else workers, len(tasks))
    if workers <= 1:
        return [_run_cell(t) for t in tasks]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(_run_cell, tasks))


def run_loss_study(M_range: Sequence[int], value: MarginalValueCurve | None = None) -> list[dict]:
    """Constrained minimax loss per format, normalized by ``v(0) Q``."""
    if value is None:
        value = MarginalValueCurve.constant(1.0, 100.0)
    scale = value.top * value.Q
    constant = len(value.levels) == 1
    rows = []
    for M in M_range:
        if constant:
            lp = pab.constant_value_constrained(value.top, value.Q, M).loss
        else:
            lp = pab.solve_constrained(value, M).loss
        lu = upa.solve_constrained(value, M).loss
        rows.append({"M": int(M), "loss_pab": lp / scale, "loss_upa": lu / scale})
    return rows


REVENUE_COLUMNS = ("n", "M", "rev_pab_mean", "rev_upa_mean", "share_upa_higher")
LOSS_COLUMNS = ("M", "loss_pab", "loss_upa")


def write_csv(rows: Sequence[dict], fh, columns: Sequence[str], fmt=lambda x: x) -> None:
    w = csv.writer(fh, lineterminator="\n")
    w.writerow(columns)
    for r in rows:
        w.writerow([fmt(r[c]) for c in columns])
