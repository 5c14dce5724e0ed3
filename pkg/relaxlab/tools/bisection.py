# Vectorised bisection for monotone maps.
# Every cell of a grid carries its own bracket, so the search runs on whole
# numpy arrays at once instead of looping over scalar root finders.

from typing import Callable

import numpy as np

from relaxlab.errors import BracketError

MAX_ITER = 200


def bisect_monotone(
    func: Callable[[np.ndarray], np.ndarray],
    lo,
    hi,
    increasing: bool = True,
    xtol: float = 0.0,
    check_bracket: bool = True,
    max_iter: int = MAX_ITER,
) -> np.ndarray:
    """Find x in [lo, hi] with func(x) = 0 for a monotone func, elementwise.

    `increasing` gives the direction of func. The loop stops once every bracket
    is narrower than `xtol` or has collapsed to two neighbouring floats.
    """
    lo, hi = np.broadcast_arrays(np.asarray(lo, dtype=float), np.asarray(hi, dtype=float))
    lo = lo.copy()
    hi = hi.copy()
    sign = 1.0 if increasing else -1.0

    if check_bracket:
        f_lo = sign * func(lo)
        f_hi = sign * func(hi)
        # a little slack: endpoints of the brackets we use are roots themselves
        # up to rounding (A(0)=0, A(1)=1)
        if np.any(f_lo > 1e-12) or np.any(f_hi < -1e-12):
            raise BracketError("bisection bracket does not enclose a sign change")

    for _ in range(max_iter):
        mid = 0.5 * (lo + hi)
        below = sign * func(mid) < 0.0
        lo = np.where(below, mid, lo)
        hi = np.where(below, hi, mid)
        nxt = 0.5 * (lo + hi)
        if np.all((hi - lo <= xtol) | (nxt == lo) | (nxt == hi)):
            break

    return 0.5 * (lo + hi)
