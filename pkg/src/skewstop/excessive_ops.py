"""Operators on the payoff used to locate stopping boundaries.

``L_psi`` and ``L_phi`` are the scale-normalized derivatives of g/psi and g/phi,
``q1``/``q2`` the exponential building blocks, ``h1 = q1 + q2`` and ``h2 = q1 - q2``.
Two slope functions are provided: :func:`l` is psi^2 (g/psi)', whose sign drives the
search for maximizers of g/psi, and :func:`l_weighted` is the skew-weighted h1
entering the three-boundary system.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import _roots, sbm_core
from .errors import BracketError, DomainError, UndefinedPointError
from .payoff import Payoff
from .sbm_core import SkewParams

__all__ = [
    "OperatorContext",
    "L_psi",
    "L_phi",
    "ratio_u",
    "maximizer_set",
    "default_bracket",
    "q1",
    "q2",
    "h1",
    "h2",
    "h1_prime",
    "h2_prime",
    "l",
    "l_weighted",
    "TIE_RTOL",
]

TIE_RTOL = 1e-10


@dataclass(frozen=True)
class OperatorContext:
    p: SkewParams
    g: Payoff

    def __post_init__(self):
        if not (0.0 < self.p.beta < 1.0):
            raise DomainError(f"operators need beta in (0, 1), got {self.p.beta}")

    @property
    def theta(self) -> float:
        return self.p.theta


def _out(a):
    return a.item() if np.ndim(a) == 0 else a


def _gprime(ctx, x, side):
    return np.asarray(ctx.g.dplus(x) if side == "+" else ctx.g.dminus(x), dtype=float)


def _nonzero(x, name):
    x = np.asarray(x, dtype=float)
    if np.any(x == 0):
        raise UndefinedPointError(f"{name} has different one-sided limits at 0")
    return x


def q1(x, ctx: OperatorContext, side: str = "+"):
    x = np.asarray(x, dtype=float)
    th = ctx.theta
    return _out(np.exp(th * x) * (_gprime(ctx, x, side) - th * np.asarray(ctx.g.eval(x))))


def q2(x, ctx: OperatorContext, side: str = "+"):
    x = np.asarray(x, dtype=float)
    th = ctx.theta
    return _out(np.exp(-th * x) * (_gprime(ctx, x, side) + th * np.asarray(ctx.g.eval(x))))


def h1(x, ctx: OperatorContext, side: str = "+"):
    return _out(np.asarray(q1(x, ctx, side)) + np.asarray(q2(x, ctx, side)))


def h2(x, ctx: OperatorContext, side: str = "+"):
    return _out(np.asarray(q1(x, ctx, side)) - np.asarray(q2(x, ctx, side)))


def _curvature(x, ctx):
    """g'' - 2 r g."""
    return np.asarray(ctx.g.d2(x), dtype=float) - 2.0 * ctx.p.r * np.asarray(ctx.g.eval(x), dtype=float)


def h1_prime(x, ctx: OperatorContext):
    x = np.asarray(x, dtype=float)
    th = ctx.theta
    return _out((np.exp(th * x) + np.exp(-th * x)) * _curvature(x, ctx))


def h2_prime(x, ctx: OperatorContext):
    x = np.asarray(x, dtype=float)
    th = ctx.theta
    return _out((np.exp(th * x) - np.exp(-th * x)) * _curvature(x, ctx))


def L_psi(x, ctx: OperatorContext, side: str = "+"):
    """(psi^2 / S') d/dx [g / psi]."""
    x = _nonzero(x, "L_psi")
    b = ctx.p.beta
    a1, a2 = np.asarray(q1(x, ctx, side)), np.asarray(q2(x, ctx, side))
    return _out(np.where(x > 0, 0.5 * (a1 + (2 * b - 1) * a2), (1 - b) * a1))


def L_phi(x, ctx: OperatorContext, side: str = "+"):
    """(phi^2 / S') d/dx [g / phi]."""
    x = _nonzero(x, "L_phi")
    b = ctx.p.beta
    a1, a2 = np.asarray(q1(x, ctx, side)), np.asarray(q2(x, ctx, side))
    return _out(np.where(x > 0, b * a2, 0.5 * (a2 - (2 * b - 1) * a1)))


def ratio_u(x, ctx: OperatorContext):
    """g / psi, evaluated through log psi so it stays finite for large x."""
    x = np.asarray(x, dtype=float)
    return _out(np.asarray(ctx.g.eval(x), dtype=float) * np.exp(-np.asarray(sbm_core.log_psi(x, ctx.p))))


def _l_branches(x, ctx, side):
    b = ctx.p.beta
    a1, a2 = np.asarray(q1(x, ctx, side)), np.asarray(q2(x, ctx, side))
    right = (a1 + (2 * b - 1) * a2) / (2 * b)
    return a1, right


def l(x, ctx: OperatorContext, side: str = "+"):
    """psi^2 (g/psi)'.  At 0 the pair ``(l(0-), l(0+))`` is returned."""
    x = np.asarray(x, dtype=float)
    if x.ndim == 0 and x == 0:
        left, _ = _l_branches(x, ctx, "-")
        _, right = _l_branches(x, ctx, "+")
        return float(left), float(right)
    left, right = _l_branches(x, ctx, side)
    return _out(np.where(x > 0, right, left))


def l_weighted(x, ctx: OperatorContext, side: str = "+"):
    """beta*h1 on x > 0 and (1-beta)*h1 on x < 0; at 0 returns ``(l(0-), l(0+))``."""
    b = ctx.p.beta
    x = np.asarray(x, dtype=float)
    if x.ndim == 0 and x == 0:
        return (1 - b) * float(h1(0.0, ctx, "-")), b * float(h1(0.0, ctx, "+"))
    hh = np.asarray(h1(x, ctx, side))
    return _out(np.where(x > 0, b * hh, (1 - b) * hh))


def _l_right(x: float, ctx) -> float:
    """Right limit l(x+) as a scalar; the sign used by the maximizer search."""
    if x == 0:
        return l(0.0, ctx)[1]
    return float(l(x, ctx, "+"))


def default_bracket(ctx: OperatorContext) -> tuple[float, float]:
    th = ctx.theta
    pts = [0.0, *ctx.g.kinks()]
    return min(pts) - 10.0 / th, max(pts) + 40.0 / th


def maximizer_set(ctx: OperatorContext, bracket=None, n_grid: int = 4001) -> list[float]:
    """Global maximizers of g/psi, sorted.

    The slope l is sampled on a grid (0 and the payoff's kinks included); every
    change from l(x+) > 0 to l(x+) <= 0 is refined by bisection to 1e-12, which
    also captures maxima sitting on a downward jump of l.  Candidates whose ratio
    is within ``TIE_RTOL * max(1, u)`` of the best are all returned.
    """
    a, b = default_bracket(ctx) if bracket is None else map(float, bracket)
    if not a < b:
        raise DomainError(f"empty bracket ({a}, {b})")
    grid = np.linspace(a, b, n_grid)
    extra = [v for v in (0.0, *ctx.g.kinks()) if a < v < b]
    grid = np.unique(np.concatenate([grid, extra]))
    slopes = np.array([_l_right(v, ctx) for v in grid])

    if slopes[-1] > 0:
        raise BracketError(f"g/psi still increasing at right end {b:.6g}; widen the bracket")
    if slopes[0] < 0 and float(ratio_u(a, ctx)) > 0:
        raise BracketError(f"g/psi decreasing at left end {a:.6g}; widen the bracket")

    cands = []
    for i in np.flatnonzero((slopes[:-1] > 0) & (slopes[1:] <= 0)):
        lo, hi = grid[i], grid[i + 1]
        if slopes[i + 1] == 0:
            cands.append(float(hi))
            continue
        cands.append(_roots.bisect(lambda v: _l_right(v, ctx), lo, hi, what="slope of g/psi"))
    if not cands:
        raise BracketError("no maximizer of g/psi found in bracket")
    uc = np.asarray(ratio_u(np.array(cands), ctx), dtype=float)
    best = float(np.max(uc))
    keep = sorted(c for c, uv in zip(cands, uc) if best - uv < TIE_RTOL * max(1.0, best))
    return keep
