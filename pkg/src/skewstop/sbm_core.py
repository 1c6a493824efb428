"""Closed-form analytics of skew Brownian motion.

The process behaves like standard Brownian motion away from the origin and leaves
the origin upwards with probability ``beta``.  Everything here is a pure function of
its arguments and accepts scalars or numpy arrays for the state arguments.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import ndtr

from .errors import DomainError, UndefinedPointError

__all__ = [
    "SkewParams",
    "DensityPoint",
    "scale",
    "scale_prime",
    "speed_density",
    "psi",
    "phi",
    "log_psi",
    "log_phi",
    "psi_prime",
    "phi_prime",
    "psi_scale_derivative",
    "phi_scale_derivative",
    "transition_density",
    "transition_cdf",
    "mean",
    "mgf",
    "wronskian_residual",
    "exit_transforms",
]

# Above this |theta*x| the raw exponentials are replaced by their dominant term.
_EXP_CUTOFF = 700.0


@dataclass(frozen=True)
class SkewParams:
    """Skewness ``beta`` in [0, 1] and discount rate ``r`` > 0.

    ``theta = sqrt(2 r)`` is derived on access and never stored.
    """

    beta: float
    r: float

    def __post_init__(self):
        beta, r = float(self.beta), float(self.r)
        if not (0.0 <= beta <= 1.0):
            raise DomainError(f"beta must lie in [0, 1], got {self.beta}")
        if not (r > 0.0 and math.isfinite(r)):
            raise DomainError(f"r must be positive and finite, got {self.r}")
        object.__setattr__(self, "beta", beta)
        object.__setattr__(self, "r", r)

    @property
    def theta(self) -> float:
        return math.sqrt(2.0 * self.r)

    @property
    def skewed_up(self) -> bool:
        """True in the regime beta > 1/2 assumed by the stopping theory."""
        return self.beta > 0.5

    def with_(self, **changes) -> "SkewParams":
        return SkewParams(beta=changes.get("beta", self.beta), r=changes.get("r", self.r))


@dataclass(frozen=True)
class DensityPoint:
    """Initial state ``x``, terminal state ``y`` and elapsed time ``t`` > 0."""

    x: float
    y: float
    t: float

    def __post_init__(self):
        _check_time(self.t)


def _check_time(t):
    if np.any(np.asarray(t) <= 0):
        raise DomainError(f"elapsed time must be positive, got {t}")


def _need_beta_pos(p: SkewParams, what: str):
    if p.beta == 0.0:
        raise DomainError(f"{what} is undefined for beta = 0 (division by 2*beta)")


def _need_beta_lt1(p: SkewParams, what: str):
    if p.beta == 1.0:
        raise DomainError(f"{what} is undefined for beta = 1 (division by 2*(1-beta))")


def _out(a):
    return a.item() if np.ndim(a) == 0 else a


def scale(x, p: SkewParams):
    """Scale function: x/beta on the right half-line, x/(1-beta) on the left."""
    x = np.asarray(x, dtype=float)
    if p.beta == 0.0 and np.any(x > 0):
        raise DomainError("scale function is unbounded on x > 0 when beta = 0")
    if p.beta == 1.0 and np.any(x < 0):
        raise DomainError("scale function is unbounded on x < 0 when beta = 1")
    with np.errstate(divide="ignore", invalid="ignore"):
        right = x / p.beta if p.beta > 0 else np.zeros_like(x)
        left = x / (1.0 - p.beta) if p.beta < 1 else np.zeros_like(x)
    return _out(np.where(x >= 0, right, left))


def scale_prime(x, p: SkewParams):
    """Derivative of the scale function off the origin."""
    x = np.asarray(x, dtype=float)
    if np.any(x == 0):
        raise UndefinedPointError("scale function has a slope break at 0")
    with np.errstate(divide="ignore"):
        return _out(np.where(x > 0, 1.0 / p.beta, 1.0 / (1.0 - p.beta)))


def speed_density(x, p: SkewParams):
    """Density of the speed measure: 2*beta on x > 0 and 2*(1-beta) on x < 0."""
    x = np.asarray(x, dtype=float)
    if np.any(x == 0):
        raise UndefinedPointError("speed measure density has no value assigned at 0")
    return _out(np.where(x > 0, 2.0 * p.beta, 2.0 * (1.0 - p.beta)))


def log_psi(x, p: SkewParams):
    """Logarithm of the increasing fundamental solution, overflow-free."""
    _need_beta_pos(p, "psi")
    th = p.theta
    x = np.asarray(x, dtype=float)
    c = 1.0 / (2.0 * p.beta)
    xp = np.maximum(x, 0.0)
    # psi = e^{th x} (c + (1-c) e^{-2 th x}) for x >= 0; the bracket lies in [min(1,c), max(1,c)]
    right = th * xp + np.log(c + (1.0 - c) * np.exp(-2.0 * th * xp))
    return _out(np.where(x >= 0, right, th * x))


def log_phi(x, p: SkewParams):
    """Logarithm of the decreasing fundamental solution, overflow-free."""
    _need_beta_lt1(p, "phi")
    th = p.theta
    x = np.asarray(x, dtype=float)
    c = 1.0 / (2.0 * (1.0 - p.beta))
    xm = np.minimum(x, 0.0)
    # phi = e^{-th x} (c + (1-c) e^{2 th x}) for x <= 0
    left = -th * xm + np.log(c + (1.0 - c) * np.exp(2.0 * th * xm))
    return _out(np.where(x >= 0, -th * x, left))


def _exp_branch(x, p, coef_pos, coef_neg):
    """a*e^{th x} + b*e^{-th x}, switching to the dominant term when |th x| > cutoff."""
    th = p.theta
    z = th * np.asarray(x, dtype=float)
    with np.errstate(over="ignore"):
        zc = np.clip(z, -_EXP_CUTOFF, _EXP_CUTOFF)
        raw = coef_pos * np.exp(zc) + coef_neg * np.exp(-zc)
        big = np.where(z > 0, coef_pos * np.exp(z), coef_neg * np.exp(-z))
    return np.where(np.abs(z) > _EXP_CUTOFF, big, raw)


def psi(x, p: SkewParams):
    """Increasing fundamental solution of the r-resolvent equation."""
    _need_beta_pos(p, "psi")
    x = np.asarray(x, dtype=float)
    c = 1.0 / (2.0 * p.beta)
    right = _exp_branch(np.maximum(x, 0.0), p, c, 1.0 - c)
    with np.errstate(over="ignore"):
        left = np.exp(p.theta * np.minimum(x, 0.0))
    return _out(np.where(x >= 0, right, left))


def phi(x, p: SkewParams):
    """Decreasing fundamental solution of the r-resolvent equation."""
    _need_beta_lt1(p, "phi")
    x = np.asarray(x, dtype=float)
    c = 1.0 / (2.0 * (1.0 - p.beta))
    with np.errstate(over="ignore"):
        right = np.exp(-p.theta * np.maximum(x, 0.0))
    left = _exp_branch(np.minimum(x, 0.0), p, 1.0 - c, c)
    return _out(np.where(x >= 0, right, left))


def psi_prime(x, p: SkewParams):
    """Ordinary derivative of psi, defined for x != 0."""
    _need_beta_pos(p, "psi")
    x = np.asarray(x, dtype=float)
    if np.any(x == 0):
        raise UndefinedPointError("psi is not differentiable at 0 in the ordinary sense")
    th = p.theta
    c = 1.0 / (2.0 * p.beta)
    right = th * _exp_branch(np.maximum(x, 0.0), p, c, -(1.0 - c))
    left = th * np.exp(th * np.minimum(x, 0.0))
    return _out(np.where(x > 0, right, left))


def phi_prime(x, p: SkewParams):
    """Ordinary derivative of phi, defined for x != 0."""
    _need_beta_lt1(p, "phi")
    x = np.asarray(x, dtype=float)
    if np.any(x == 0):
        raise UndefinedPointError("phi is not differentiable at 0 in the ordinary sense")
    th = p.theta
    c = 1.0 / (2.0 * (1.0 - p.beta))
    right = -th * np.exp(-th * np.maximum(x, 0.0))
    left = th * _exp_branch(np.minimum(x, 0.0), p, 1.0 - c, -c)
    return _out(np.where(x > 0, right, left))


def psi_scale_derivative(x, p: SkewParams):
    """d psi / dS, including the origin where left and right values coincide."""
    x = np.asarray(x, dtype=float)
    th = p.theta
    xs = np.where(x == 0, 1.0, x)
    val = psi_prime(xs, p) / scale_prime(xs, p)
    # at 0: right value beta*th*(c - (1-c)) = th*(1-beta) = left value (1-beta)*th
    return _out(np.where(x == 0, (1.0 - p.beta) * th, val))


def phi_scale_derivative(x, p: SkewParams):
    """d phi / dS, including the origin where left and right values coincide."""
    x = np.asarray(x, dtype=float)
    th = p.theta
    xs = np.where(x == 0, 1.0, x)
    val = phi_prime(xs, p) / scale_prime(xs, p)
    return _out(np.where(x == 0, -p.beta * th, val))


def transition_density(pt: DensityPoint, p: SkewParams):
    """P_x[X_t in dy]/dy: Gaussian kernel plus the signed reflected term."""
    x, y, t = (np.asarray(v, dtype=float) for v in (pt.x, pt.y, pt.t))
    _check_time(t)
    norm = 1.0 / np.sqrt(2.0 * np.pi * t)
    direct = norm * np.exp(-((x - y) ** 2) / (2.0 * t))
    reflected = norm * np.exp(-((np.abs(x) + np.abs(y)) ** 2) / (2.0 * t))
    return _out(direct + (2.0 * p.beta - 1.0) * np.sign(y) * reflected)


def transition_cdf(pt: DensityPoint, p: SkewParams):
    """P_x[X_t <= y] in closed form via the normal distribution function."""
    x, y, t = (np.asarray(v, dtype=float) for v in (pt.x, pt.y, pt.t))
    _check_time(t)
    st = np.sqrt(t)
    a = np.abs(x)
    k = 2.0 * p.beta - 1.0
    below = ndtr((y - x) / st) - k * ndtr((y - a) / st)
    above = 1.0 - (ndtr((x - y) / st) + k * ndtr(-(a + y) / st))  # via the upper tail
    return _out(np.clip(np.where(y <= 0, below, above), 0.0, 1.0))


def mean(x, t, p: SkewParams):
    """E_x[X_t]."""
    _check_time(t)
    x = np.asarray(x, dtype=float)
    st = np.sqrt(t)
    a = np.abs(x)
    k = 2.0 * p.beta - 1.0
    dens = np.exp(-0.5 * (a / st) ** 2) / math.sqrt(2.0 * math.pi)
    return _out(x + 2.0 * k * st * dens - 2.0 * k * a * ndtr(-a / st))


def mgf(x, t, lam, p: SkewParams):
    """E_x[exp(lam X_t)]."""
    _check_time(t)
    x = np.asarray(x, dtype=float)
    lam = np.asarray(lam, dtype=float)
    st = np.sqrt(t)
    a = np.abs(x)
    k = 2.0 * p.beta - 1.0
    bracket = (
        1.0
        + k * np.exp(-lam * (a + x)) * ndtr((lam * t - a) / st)
        - k * np.exp(lam * (a - x)) * ndtr(-(lam * t + a) / st)
    )
    return _out(np.exp(lam * x + 0.5 * lam**2 * t) * bracket)


def wronskian_residual(x, p: SkewParams):
    """(psi'/S') phi - (phi'/S') psi - theta; zero for admissible x != 0."""
    x = np.asarray(x, dtype=float)
    if np.any(x == 0):
        raise UndefinedPointError("use scale derivatives at 0; the residual is defined for x != 0")
    w = psi_scale_derivative(x, p) * phi(x, p) - phi_scale_derivative(x, p) * psi(x, p)
    return _out(np.asarray(w) - p.theta)


def exit_transforms(x, lo: float, hi: float, p: SkewParams):
    """Laplace transforms of the exit time from (lo, hi) split by exit side.

    Returns ``(E_x[e^{-r tau}; exit at lo], E_x[e^{-r tau}; exit at hi])``.
    """
    if not lo < hi:
        raise DomainError(f"need lo < hi, got ({lo}, {hi})")
    x = np.asarray(x, dtype=float)
    ps_x, ph_x = psi(x, p), phi(x, p)
    ps_lo, ph_lo = psi(lo, p), phi(lo, p)
    ps_hi, ph_hi = psi(hi, p), phi(hi, p)
    den = ps_hi * ph_lo - ph_hi * ps_lo
    to_lo = (ph_x * ps_hi - ps_x * ph_hi) / den
    to_hi = (ps_x * ph_lo - ph_x * ps_lo) / den
    return _out(np.asarray(to_lo)), _out(np.asarray(to_hi))
