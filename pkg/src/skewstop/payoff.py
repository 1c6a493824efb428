"""Exercise rewards: continuous, non-decreasing, non-negative, with one-sided derivatives."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from . import sbm_core
from .errors import DomainError
from .sbm_core import SkewParams

__all__ = ["Payoff", "ShiftedCall", "shifted_call", "PayoffReport", "validate_payoff"]


def _out(a):
    return a.item() if np.ndim(a) == 0 else a


class Payoff:
    """Exercise reward g with analytic one-sided derivatives.

    Subclasses override the four evaluation methods.  Custom payoffs can be built
    from plain callables with :meth:`from_functions`.  ``smooth_from`` is the left
    end of the region on which ``d2`` is declared to hold (``None`` if nowhere).
    """

    smooth_from: Optional[float] = None

    def eval(self, x):
        raise NotImplementedError

    def dplus(self, x):
        raise NotImplementedError

    def dminus(self, x):
        raise NotImplementedError

    def d2(self, x):
        raise NotImplementedError

    def __call__(self, x):
        return self.eval(x)

    def kinks(self) -> tuple:
        """Known points where dplus != dminus (used to place probe grids)."""
        return ()

    @staticmethod
    def from_functions(
        eval: Callable,
        dplus: Callable,
        dminus: Optional[Callable] = None,
        d2: Optional[Callable] = None,
        smooth_from: Optional[float] = None,
        kinks: tuple = (),
    ) -> "Payoff":
        return FunctionPayoff(eval, dplus, dminus or dplus, d2, smooth_from, tuple(kinks))


@dataclass(frozen=True, eq=False)
class FunctionPayoff(Payoff):
    fn: Callable
    fn_dplus: Callable
    fn_dminus: Callable
    fn_d2: Optional[Callable] = None
    smooth_from: Optional[float] = None
    known_kinks: tuple = field(default=())

    def eval(self, x):
        return self.fn(x)

    def dplus(self, x):
        return self.fn_dplus(x)

    def dminus(self, x):
        return self.fn_dminus(x)

    def d2(self, x):
        if self.fn_d2 is None:
            raise DomainError("payoff declares no second derivative")
        return self.fn_d2(x)

    def kinks(self):
        return self.known_kinks


@dataclass(frozen=True, eq=False)
class ShiftedCall(Payoff):
    """g(x) = (x + K)^+ with K > 0."""

    K: float

    def __post_init__(self):
        if not (float(self.K) > 0.0 and np.isfinite(self.K)):
            raise DomainError(f"K must be positive, got {self.K}")
        object.__setattr__(self, "K", float(self.K))

    @property
    def smooth_from(self):
        # linear (so C^2) on (-K, inf); any threshold strictly right of -K is admissible
        return -self.K

    def eval(self, x):
        return _out(np.maximum(np.asarray(x, dtype=float) + self.K, 0.0))

    def dplus(self, x):
        return _out(np.where(np.asarray(x, dtype=float) >= -self.K, 1.0, 0.0))

    def dminus(self, x):
        return _out(np.where(np.asarray(x, dtype=float) > -self.K, 1.0, 0.0))

    def d2(self, x):
        x = np.asarray(x, dtype=float)
        if np.any(x == -self.K):
            raise DomainError("shifted call has no second derivative at its kink -K")
        return _out(np.zeros_like(x))

    def kinks(self):
        return (-self.K,)


def shifted_call(K: float) -> ShiftedCall:
    return ShiftedCall(K)


@dataclass
class PayoffReport:
    ok: bool
    violations: list = field(default_factory=list)

    @property
    def first_violation(self) -> Optional[str]:
        return self.violations[0] if self.violations else None

    def __bool__(self):
        return self.ok


def validate_payoff(g: Payoff, p: SkewParams, grid, deriv_tol: float = 1e-6) -> PayoffReport:
    """Check the standing payoff assumptions on a sample grid.

    Checks non-negativity, monotonicity, non-negative one-sided derivatives,
    derivative consistency against central differences, and that g/psi is still
    decaying toward both ends of the grid.
    """
    x = np.sort(np.asarray(grid, dtype=float).ravel())
    if x.size == 0:
        raise DomainError("validation grid is empty")
    viol = []
    gx = np.asarray(g.eval(x), dtype=float)
    dp = np.asarray(g.dplus(x), dtype=float)
    dm = np.asarray(g.dminus(x), dtype=float)

    bad = np.flatnonzero(~(gx >= 0))
    if bad.size:
        viol.append(f"(g1) negative value g({x[bad[0]]:.6g}) = {gx[bad[0]]:.6g}")
    bad = np.flatnonzero(np.diff(gx) < -1e-14 * np.maximum(1.0, np.abs(gx[:-1])))
    if bad.size:
        viol.append(f"(g1) decreasing between {x[bad[0]]:.6g} and {x[bad[0] + 1]:.6g}")
    bad = np.flatnonzero((dp < 0) | (dm < 0))
    if bad.size:
        viol.append(f"(g1) negative one-sided derivative at {x[bad[0]]:.6g}")

    # central differences where the payoff claims differentiability
    h = 1e-5 * np.maximum(1.0, np.abs(x))
    smooth = np.abs(dp - dm) <= 1e-12
    for k in g.kinks():
        smooth &= np.abs(x - k) > 2 * h
    fd = (np.asarray(g.eval(x + h), dtype=float) - np.asarray(g.eval(x - h), dtype=float)) / (2 * h)
    err = np.abs(fd - dp) / np.maximum(1.0, np.abs(dp))
    bad = np.flatnonzero(smooth & (err > deriv_tol))
    if bad.size:
        i = bad[0]
        viol.append(f"derivative mismatch at {x[i]:.6g}: analytic {dp[i]:.6g}, central diff {fd[i]:.6g}")

    if x.size >= 2:
        u = gx * np.exp(-np.asarray(sbm_core.log_psi(x, p)))
        umax = float(np.max(u))
        if umax > 0 and not (u[-1] <= u[-2] and u[-1] < umax):
            viol.append(f"(g2) g/psi not decaying at right end x={x[-1]:.6g}")
        if umax > 0 and not u[0] <= u[1]:
            viol.append(f"(g2) g/psi not decaying at left end x={x[0]:.6g}")
    return PayoffReport(ok=not viol, violations=viol)
