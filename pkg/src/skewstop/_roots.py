from __future__ import annotations

import numpy as np
from scipy import optimize

from .errors import BracketError

XTOL = 1e-12


def bisect(f, a: float, b: float, xtol: float = XTOL, what: str = "root") -> float:
    """Bracketed bisection; a bracket without a sign change raises BracketError."""
    fa, fb = f(a), f(b)
    if fa == 0:
        return a
    if fb == 0:
        return b
    if (fa > 0) == (fb > 0):
        raise BracketError(f"no sign change for {what} in [{a:.17g}, {b:.17g}] (f={fa:.3g}, {fb:.3g})")
    return optimize.bisect(f, a, b, xtol=xtol, rtol=4 * np.finfo(float).eps, maxiter=400)


def expand_right(f, a: float, step: float, max_doublings: int = 80) -> float:
    """Smallest a + step*2^k (k >= 0) at which f is no longer positive."""
    b = a + step
    for _ in range(max_doublings):
        if f(b) <= 0:
            return b
        step *= 2.0
        b = a + step
    raise BracketError(f"f stays positive on [{a:.6g}, {b:.6g}]")
