"""Regime classification, boundary solvers and value functions.

Three regimes occur for a non-decreasing payoff when the process is skewed upwards:

* ``SingleBoundary``: stop as soon as X reaches x* > 0.
* ``Tangency``: stop at the isolated point x1* < 0 or on [x*, inf).
* ``ThreeBoundary``: stop on [x1*, y1*] and on [y2*, inf), wait on a window
  (y1*, y2*) around the skew point and left of x1*.

All root finding is bracketed bisection.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import Optional, Union

import numpy as np
from scipy import optimize

from . import _roots, sbm_core
from .errors import AssumptionViolation, BracketError, DomainError
from .excessive_ops import (
    OperatorContext,
    L_phi,
    L_psi,
    h1,
    h2,
    l,
    maximizer_set,
    ratio_u,
)
from .payoff import ShiftedCall
from .sbm_core import SkewParams

__all__ = [
    "Regime",
    "SingleBoundary",
    "Tangency",
    "ThreeBoundary",
    "RegimeSolution",
    "CriticalRate",
    "ValueFunction",
    "critical_function",
    "critical_rate",
    "critical_beta",
    "classify",
    "solve",
    "solve_single",
    "solve_tangency",
    "solve_three",
    "value_function",
    "continuation_region",
    "stopping_set",
    "system_residuals",
    "TANGENCY_RTOL",
]

TANGENCY_RTOL = 1e-9
_CURVE_XTOL = 1e-14


class Regime(str, enum.Enum):
    SINGLE = "single"
    TANGENCY = "tangency"
    THREE = "three"


@dataclass(frozen=True)
class SingleBoundary:
    x_star: float
    regime = Regime.SINGLE

    def boundaries(self) -> dict:
        return {"x1_star": None, "y1_star": None, "y2_star": None, "x_star": self.x_star}


@dataclass(frozen=True)
class Tangency:
    x1_star: float
    x_star: float
    regime = Regime.TANGENCY

    def boundaries(self) -> dict:
        return {"x1_star": self.x1_star, "y1_star": None, "y2_star": None, "x_star": self.x_star}


@dataclass(frozen=True)
class ThreeBoundary:
    x1_star: float
    y1_star: float
    y2_star: float
    method: str = "curves"
    # whether the sufficient condition (1-b) th e^{-th x1} g(x1) > b g'(0) held
    condition_ii: bool = True
    residuals: tuple = field(default=(0.0, 0.0), compare=False)
    regime = Regime.THREE

    def boundaries(self) -> dict:
        return {"x1_star": self.x1_star, "y1_star": self.y1_star, "y2_star": self.y2_star, "x_star": None}


RegimeSolution = Union[SingleBoundary, Tangency, ThreeBoundary]


@dataclass(frozen=True)
class CriticalRate:
    beta: float
    K: float
    theta_hat: float
    r_hat: float


# ---------------------------------------------------------------------------
# critical discount rate for the shifted call


def critical_function(theta, beta: float, K: float):
    """C(theta, beta): positive below the critical theta, negative above."""
    s = np.sqrt(beta * beta + (2 * beta - 1) * np.exp(2 * (np.asarray(theta, dtype=float) * K - 1)))
    val = beta + beta * np.log(beta + s) - s
    return val.item() if np.ndim(val) == 0 else val


def critical_rate(beta: float, K: float) -> CriticalRate:
    """Discount rate at which the shifted-call problem switches to three boundaries."""
    beta, K = float(beta), float(K)
    if not (0.5 < beta <= 1.0):
        raise DomainError(f"critical rate needs beta in (1/2, 1], got {beta}")
    if not K > 0:
        raise DomainError(f"K must be positive, got {K}")
    f = lambda th: critical_function(th, beta, K)
    lo = 1.0 / K
    if beta < 1.0:
        hi = (1.0 + math.log(beta / (1.0 - beta))) / K
    else:
        hi = _roots.expand_right(f, lo, 1.0 / K)
    th = _roots.bisect(f, lo, hi, xtol=1e-15, what="critical theta")
    return CriticalRate(beta=beta, K=K, theta_hat=th, r_hat=0.5 * th * th)


def _r_hat(beta: float, K: float) -> float:
    if beta <= 0.5:
        return 0.5 / K**2  # limit as beta -> 1/2
    return critical_rate(beta, K).r_hat


def critical_beta(r: float, K: float) -> Optional[float]:
    """Skewness at which the critical rate equals ``r``; None when out of range."""
    r, K = float(r), float(K)
    if not (r > 0 and K > 0):
        raise DomainError("r and K must be positive")
    if r <= _r_hat(0.5, K) or r > _r_hat(1.0, K):
        return None
    return _roots.bisect(lambda b: _r_hat(b, K) - r, 0.5, 1.0, xtol=1e-13, what="critical beta")


# ---------------------------------------------------------------------------
# classification and solvers


def _require_skewed(ctx: OperatorContext):
    if not (0.5 < ctx.p.beta < 1.0):
        raise DomainError(f"stopping solver needs beta in (1/2, 1), got {ctx.p.beta}")


def classify(ctx: OperatorContext) -> Regime:
    """Regime of the shifted-call problem from the position of r against the critical rate."""
    _require_skewed(ctx)
    if not isinstance(ctx.g, ShiftedCall):
        raise DomainError("classify() is defined for the shifted call; use solve() for other payoffs")
    r_hat = critical_rate(ctx.p.beta, ctx.g.K).r_hat
    r = ctx.p.r
    if abs(r - r_hat) < TANGENCY_RTOL * max(1.0, r_hat):
        return Regime.TANGENCY
    return Regime.SINGLE if r < r_hat else Regime.THREE


def _upper_root(ctx: OperatorContext) -> float:
    """Root of l on (0, inf), i.e. the first-order condition for a maximizer right of 0."""
    f = lambda x: float(l(x, ctx)) if x > 0 else l(0.0, ctx)[1]
    if f(0.0) <= 0:
        raise AssumptionViolation("g/psi is non-increasing right of 0; no upper maximizer")
    hi = _roots.expand_right(f, 0.0, 1.0 / ctx.theta)
    return _roots.bisect(f, 0.0, hi, what="upper threshold")


def _smooth_on(g, lo: float) -> bool:
    """Whether g is declared C^2 on [lo, inf); the call is linear on the open (-K, inf)."""
    if g.smooth_from is None:
        return False
    return g.smooth_from < lo if isinstance(g, ShiftedCall) else g.smooth_from <= lo


def _check_concavity(ctx: OperatorContext, lo: float, hi: float, strict_eps: Optional[float]):
    """Sample g'' - 2 r g on [lo, hi]: <= 0, or < -strict_eps when given."""
    g = ctx.g
    if not _smooth_on(g, lo):
        raise AssumptionViolation(f"payoff is not declared C^2 on [{lo:.6g}, inf)")
    xs = np.linspace(lo, hi, 2001)
    vals = np.asarray(g.d2(xs), dtype=float) - 2 * ctx.p.r * np.asarray(g.eval(xs), dtype=float)
    worst = float(np.max(vals))
    if worst > 0 or (strict_eps is not None and worst >= -strict_eps):
        raise AssumptionViolation(f"g'' - 2 r g reaches {worst:.3g} on [{lo:.6g}, {hi:.6g}]")


def solve_single(ctx: OperatorContext) -> SingleBoundary:
    """Single upper threshold x* > 0 maximizing g/psi."""
    _require_skewed(ctx)
    if isinstance(ctx.g, ShiftedCall):
        regime = classify(ctx)
        if regime is not Regime.SINGLE:
            raise AssumptionViolation(f"parameters are in the {regime.value} regime")
        x_star = _upper_root(ctx)
    else:
        M = maximizer_set(ctx)
        if len(M) != 1 or M[0] <= 0:
            raise AssumptionViolation(f"single-boundary case needs a unique positive maximizer, got {M}")
        x_star = M[0]
    _check_concavity(ctx, x_star, x_star + 10.0 / ctx.theta, strict_eps=None)
    return SingleBoundary(x_star=x_star)


def solve_tangency(ctx: OperatorContext) -> Tangency:
    """Two equal maximizers x1* < 0 < x* of g/psi."""
    _require_skewed(ctx)
    if isinstance(ctx.g, ShiftedCall):
        x1 = 1.0 / ctx.theta - ctx.g.K
        x_star = _upper_root(ctx)
    else:
        M = maximizer_set(ctx)
        if len(M) != 2 or not (M[0] < 0 < M[1]):
            raise AssumptionViolation(f"tangency case needs maximizers x1 < 0 < x, got {M}")
        x1, x_star = M
    return Tangency(x1_star=x1, x_star=x_star)


def _lower_maximizer(ctx: OperatorContext) -> float:
    if isinstance(ctx.g, ShiftedCall):
        return 1.0 / ctx.theta - ctx.g.K
    M = maximizer_set(ctx)
    if len(M) > 2:
        raise AssumptionViolation(f"g/psi has {len(M)} maximizers; only one or two are supported")
    if len(M) != 1 or M[0] >= 0:
        raise AssumptionViolation(f"three-boundary case needs a unique negative maximizer, got {M}")
    return M[0]


def system_residuals(y1: float, y2: float, ctx: OperatorContext) -> tuple[float, float]:
    """Residuals of L_psi g(y1) = L_psi g(y2) and L_phi g(y1) = L_phi g(y2)."""
    return (
        float(L_psi(y1, ctx)) - float(L_psi(y2, ctx)),
        float(L_phi(y1, ctx)) - float(L_phi(y2, ctx)),
    )


def _matching_h2(x: float, ctx) -> float:
    """y >= 0 with h2(y) = h2(x)."""
    target = float(h2(x, ctx))
    f = lambda y: float(h2(y, ctx)) - target
    if f(0.0) <= 0:
        return 0.0
    hi = _roots.expand_right(f, 0.0, 1.0 / ctx.theta)
    return _roots.bisect(f, 0.0, hi, xtol=_CURVE_XTOL, what="h2 level curve")


def _matching_l(x: float, ctx) -> float:
    """y >= 0 with beta h1(y) = (1-beta) h1(x); clamped to 0 where no such y exists."""
    b = ctx.p.beta
    target = (1 - b) * float(h1(x, ctx))
    f = lambda y: b * float(h1(y, ctx)) - target
    if f(0.0) <= 0:
        return 0.0
    hi = _roots.expand_right(f, 0.0, 1.0 / ctx.theta)
    return _roots.bisect(f, 0.0, hi, xtol=_CURVE_XTOL, what="l level curve")


def _three_by_curves(ctx, x1):
    gap = lambda x: _matching_h2(x, ctx) - _matching_l(x, ctx)
    if gap(x1) <= 0:
        raise BracketError("level curves do not cross on (x1*, 0)")
    y1 = _roots.bisect(gap, x1, 0.0, xtol=_CURVE_XTOL, what="curve crossing")
    return y1, _matching_h2(y1, ctx)


def _curves_monotone(ctx, x1) -> bool:
    xs = np.linspace(x1, 0.0, 9)[1:-1]
    yt = np.array([_matching_h2(x, ctx) for x in xs])
    yh = np.array([_matching_l(x, ctx) for x in xs])
    return bool(np.all(np.diff(yt) <= 1e-12) and np.all(np.diff(yh) >= -1e-12))


def _three_by_least_squares(ctx, x1):
    th = ctx.theta

    def resid(v):
        return np.array(system_residuals(v[0], v[1], ctx))

    x0 = np.array([0.5 * x1, 0.5 / th])
    eps = 1e-12
    sol = optimize.least_squares(
        resid, x0, bounds=([x1 + eps, eps], [-eps, np.inf]), xtol=1e-15, ftol=1e-15, gtol=1e-15
    )
    return float(sol.x[0]), float(sol.x[1])


def solve_three(ctx: OperatorContext, enforce_condition_ii: Optional[bool] = None) -> ThreeBoundary:
    """Lower maximizer x1* < 0 plus the window (y1*, y2*) around the skew point.

    The window solves h2(y1) = h2(y2), (1-beta) h1(y1) = beta h1(y2).  For each x in
    (x1*, 0) the two level curves y~(x) (from h2) and y^(x) (from the weighted h1)
    are computed by bisection; their crossing, also found by bisection, is y1*.

    The condition (1-beta) theta e^{-theta x1*} g(x1*) > beta g'(0) is sufficient
    but not necessary for a crossing.  It is enforced by default for custom payoffs
    only; for the shifted call the three-boundary solution exists whenever r
    exceeds the critical rate.  A missing crossing raises BracketError.
    """
    _require_skewed(ctx)
    g, b, th = ctx.g, ctx.p.beta, ctx.theta
    is_call = isinstance(g, ShiftedCall)
    if is_call and classify(ctx) is not Regime.THREE:
        raise AssumptionViolation("parameters are not in the three-boundary regime")
    x1 = _lower_maximizer(ctx)
    if not _smooth_on(g, x1):
        raise AssumptionViolation(f"payoff is not declared C^2 on [{x1:.6g}, inf)")

    gp0 = float(g.dplus(0.0))
    cond_ii = bool((1 - b) * th * math.exp(-th * x1) * float(g.eval(x1)) > b * gp0 > 0)
    if enforce_condition_ii is None:
        enforce_condition_ii = not is_call
    if enforce_condition_ii and not cond_ii:
        raise AssumptionViolation("condition (1-b) th e^{-th x1} g(x1) > b g'(0) > 0 fails")

    if is_call or _curves_monotone(ctx, x1):
        y1, y2 = _three_by_curves(ctx, x1)
        method = "curves"
    else:
        y1, y2 = _three_by_least_squares(ctx, x1)
        method = "least_squares"
    if not (x1 < y1 < 0 < y2):
        raise BracketError(f"solution ({y1:.6g}, {y2:.6g}) violates x1* < y1 < 0 < y2")
    _check_concavity(ctx, x1, y2 + 10.0 / th, strict_eps=1e-12 * 2 * ctx.p.r * float(g.eval(x1)))
    res = system_residuals(y1, y2, ctx)
    return ThreeBoundary(x1_star=x1, y1_star=y1, y2_star=y2, method=method, condition_ii=cond_ii, residuals=res)


def solve(ctx: OperatorContext) -> RegimeSolution:
    """Classify and solve in one call."""
    _require_skewed(ctx)
    if isinstance(ctx.g, ShiftedCall):
        regime = classify(ctx)
    else:
        M = maximizer_set(ctx)
        if len(M) > 2:
            raise AssumptionViolation(f"g/psi has {len(M)} maximizers; only one or two are supported")
        if len(M) == 2:
            regime = Regime.TANGENCY
        elif M[0] > 0:
            regime = Regime.SINGLE
        elif M[0] < 0:
            regime = Regime.THREE
        else:
            raise AssumptionViolation("maximizer of g/psi at the skew point itself")
    return {Regime.SINGLE: solve_single, Regime.TANGENCY: solve_tangency, Regime.THREE: solve_three}[regime](ctx)


# ---------------------------------------------------------------------------
# value function and regions


def stopping_set(sol: RegimeSolution) -> list[tuple[float, float]]:
    """Closed intervals (possibly degenerate or unbounded) on which stopping is optimal."""
    if isinstance(sol, SingleBoundary):
        return [(sol.x_star, math.inf)]
    if isinstance(sol, Tangency):
        return [(sol.x1_star, sol.x1_star), (sol.x_star, math.inf)]
    return [(sol.x1_star, sol.y1_star), (sol.y2_star, math.inf)]


def continuation_region(sol: RegimeSolution, ctx: Optional[OperatorContext] = None) -> list[tuple[float, float]]:
    """Open intervals where waiting is optimal (complement of :func:`stopping_set`)."""
    if isinstance(sol, SingleBoundary):
        return [(-math.inf, sol.x_star)]
    if isinstance(sol, Tangency):
        return [(-math.inf, sol.x1_star), (sol.x1_star, sol.x_star)]
    return [(-math.inf, sol.x1_star), (sol.y1_star, sol.y2_star)]


class ValueFunction:
    """Closed-form value V(x) for a solved regime; callable on scalars or arrays."""

    def __init__(self, regime: RegimeSolution, ctx: OperatorContext):
        self.regime = regime
        self.ctx = ctx
        M = _anchor_points(regime)
        self.sup_ratio = float(max(np.atleast_1d(ratio_u(np.array(M), ctx))))

    def _psi_extension(self, x, anchor):
        p, g = self.ctx.p, self.ctx.g
        return float(g.eval(anchor)) * np.exp(np.asarray(sbm_core.log_psi(x, p)) - float(sbm_core.log_psi(anchor, p)))

    def eval(self, x):
        x = np.asarray(x, dtype=float)
        g = self.ctx.g
        gx = np.asarray(g.eval(x), dtype=float)
        sol = self.regime
        if isinstance(sol, SingleBoundary):
            out = np.where(x >= sol.x_star, gx, self._psi_extension(x, sol.x_star))
        elif isinstance(sol, Tangency):
            stop = (x == sol.x1_star) | (x >= sol.x_star)
            out = np.where(stop, gx, self._psi_extension(x, sol.x_star))
        else:
            y1, y2 = sol.y1_star, sol.y2_star
            inside = (x > y1) & (x < y2)
            xi = np.where(inside, x, 0.5 * (y1 + y2))
            a, b = sbm_core.exit_transforms(xi, y1, y2, self.ctx.p)
            window = float(g.eval(y1)) * np.asarray(a) + float(g.eval(y2)) * np.asarray(b)
            out = np.where(
                x < sol.x1_star,
                self._psi_extension(x, sol.x1_star),
                np.where(inside, window, gx),
            )
        return out.item() if out.ndim == 0 else out

    __call__ = eval

    def ratio_bound(self, x):
        """psi(x) * sup g/psi, an upper bound for V."""
        return self.sup_ratio * np.exp(np.asarray(sbm_core.log_psi(x, self.ctx.p)))


def _anchor_points(sol):
    if isinstance(sol, SingleBoundary):
        return [sol.x_star]
    return [sol.x1_star] + ([sol.x_star] if isinstance(sol, Tangency) else [])


def value_function(sol: RegimeSolution, ctx: OperatorContext) -> ValueFunction:
    return ValueFunction(sol, ctx)
