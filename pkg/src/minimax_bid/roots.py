"""Bracketing root finders.

Residuals in this package are piecewise linear with kinks wherever a
positive part switches on, so derivative-based methods are avoided.
"""

from __future__ import annotations

from typing import Callable

from .errors import ConvergenceError

RESIDUAL_TOL = 1e-12
MAX_ITER = 200


def bisect_increasing(
    f: Callable[[float], float],
    lo: float,
    hi: float,
    *,
    tol: float = RESIDUAL_TOL,
    xtol: float = 0.0,
    max_iter: int = MAX_ITER,
) -> float:
    """Root of a weakly increasing function on ``[lo, hi]``.

    Requires ``f(lo) <= 0 <= f(hi)``. Stops when ``|f(mid)| <= tol``, when the
    bracket is narrower than ``xtol`` or when it can no longer be split in
    floating point. Pass ``tol=0`` to bisect down to machine resolution.
    """
    flo = f(lo)
    if flo >= 0.0:
        if flo <= tol:
            return lo
        raise ConvergenceError(f"residual positive at lower end ({flo:.3g})")
    fhi = f(hi)
    if fhi <= 0.0:
        if fhi >= -tol:
            return hi
        raise ConvergenceError(f"residual negative at upper end ({fhi:.3g})")
    for _ in range(max_iter):
        mid = 0.5 * (lo + hi)
        if mid <= lo or mid >= hi:
            break
        fm = f(mid)
        if abs(fm) <= tol:
            return mid
        if fm > 0.0:
            hi = mid
        else:
            lo = mid
        if hi - lo <= xtol:
            break
    return 0.5 * (lo + hi)


def bisect_decreasing(f: Callable[[float], float], lo: float, hi: float, **kw) -> float:
    """Root of a weakly decreasing function on ``[lo, hi]``."""
    return bisect_increasing(lambda x: -f(x), lo, hi, **kw)
