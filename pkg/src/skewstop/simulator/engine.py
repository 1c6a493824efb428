from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, asdict
from typing import Optional, Sequence

import numpy as np

from .. import _backend
from ..errors import DomainError
from ..payoff import Payoff
from ..sbm_core import SkewParams
from . import kernels

# Bias allowance per unit grid spacing used by verify_value: |MC - V| may exceed
# 3 standard errors by at most BIAS_C * dx * max(1, |V|).  The walk's exact
# discrete value differs from V by ~1e-7 at dx = 1e-3 on the reference configs
# (snapping is second order at smooth-fit boundaries), so 0.25 is generous yet
# still below the ~3.6e-4 loss of a 10% boundary perturbation at x = -0.5.
BIAS_C = 0.25

_INF_IDX = np.int64(2**62)
_MAX_JUMP_ITER = 10**8

_CHUNK = 8192


@dataclass(frozen=True)
class WalkConfig:
    """Simulation knobs.  Time advances dx^2 per walk step."""

    dx: float = 1e-3
    seed: int = 0
    n_paths: int = 100_000
    t_max: Optional[float] = None  # None -> 50 / r
    scheme: str = "jump"
    workers: int = 1
    backend: Optional[str] = None  # None -> package default

    def __post_init__(self):
        if not self.dx > 0:
            raise DomainError(f"dx must be positive, got {self.dx}")
        if int(self.n_paths) < 1:
            raise DomainError(f"n_paths must be >= 1, got {self.n_paths}")
        if self.t_max is not None and not self.t_max > 0:
            raise DomainError(f"t_max must be positive, got {self.t_max}")
        if self.scheme not in ("jump", "step"):
            raise DomainError(f"scheme must be 'jump' or 'step', got {self.scheme!r}")
        if self.backend not in (None, "numba", "numpy"):
            raise DomainError(f"backend must be 'numba' or 'numpy', got {self.backend!r}")

    def horizon(self, r: float) -> float:
        return 50.0 / r if self.t_max is None else float(self.t_max)

    def resolved_backend(self) -> str:
        b = self.backend or _backend.BACKEND
        if b == "numba" and not _backend.HAVE_NUMBA:
            raise DomainError("numba backend requested but numba is not importable")
        return b


@dataclass(frozen=True)
class MCEstimate:
    mean: float
    std_error: float
    n_paths: int
    truncated_fraction: float
    seed: int = 0
    dx: float = 0.0
    scheme: str = "jump"
    generator: str = kernels.GENERATOR

    def to_dict(self) -> dict:
        return asdict(self)


# ---------------------------------------------------------------------------
# exact sampling from the transition law


def exact_step(x: float, t: float, p: SkewParams, rng: np.random.Generator) -> float:
    """One draw of X_t given X_0 = x, by inverting the closed-form CDF."""
    if not t > 0:
        raise DomainError(f"t must be positive, got {t}")
    out = np.empty(1)
    kernels.invert_cdf_np(np.array([rng.random()]), float(x), float(t), p.beta, out)
    return float(out[0])


def exact_sample(x: float, t: float, p: SkewParams, n: int, seed: int = 0, backend: Optional[str] = None) -> np.ndarray:
    """``n`` independent draws of X_t given X_0 = x (path i uses stream (seed, i))."""
    if not t > 0:
        raise DomainError(f"t must be positive, got {t}")
    key = kernels.seed_key(seed)
    u = kernels.uniforms_np(kernels.path_keys_np(key, 0, n), np.zeros(n, dtype=np.uint64))
    out = np.empty(n)
    if (backend or _backend.BACKEND) == "numba":
        kernels.invert_cdf_nb(u, float(x), float(t), p.beta, out)
    else:
        kernels.invert_cdf_np(u, float(x), float(t), p.beta, out)
    return out


# ---------------------------------------------------------------------------
# random-walk path simulation


def _grid_stop_set(stop_set, dx):
    """Closed index intervals of grid sites inside each stop interval.

    Sites are kept only if they lie in the interval, which shrinks each interval
    toward its interior (walk stops no earlier than the true rule).  An interval
    containing no site, e.g. an isolated point, is replaced by its nearest site.
    """
    lo, hi = [], []
    eps = 1e-9
    for a, b in stop_set:
        ia = -_INF_IDX if a == -math.inf else np.int64(math.ceil(a / dx - eps))
        ib = _INF_IDX if b == math.inf else np.int64(math.floor(b / dx + eps))
        if ia > ib:
            ia = ib = np.int64(round(0.5 * (a + b) / dx))
        lo.append(ia)
        hi.append(ib)
    return np.array(lo, dtype=np.int64), np.array(hi, dtype=np.int64)


def _normalize_stop_set(stop_set):
    ivs = []
    for iv in stop_set:
        a, b = (float(iv), float(iv)) if np.ndim(iv) == 0 else (float(iv[0]), float(iv[1]))
        if not a <= b:
            raise DomainError(f"stop interval ({a}, {b}) is empty")
        ivs.append((a, b))
    if not ivs:
        raise DomainError("stop set is empty")
    return sorted(ivs)


def _chunks(n, workers):
    size = max(1, min(_CHUNK, -(-n // max(1, workers))))
    return [(s, min(size, n - s)) for s in range(0, n, size)]


def _run_chunks(fn, n, workers, outs):
    jobs = _chunks(n, workers)

    def run(job):
        s, m = job
        fn(s, m, *[o[s : s + m] for o in outs])

    if workers <= 1:
        for job in jobs:
            run(job)
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            list(pool.map(run, jobs))


def simulate_stops(x0: float, stop_set, r: float, cfg: WalkConfig, p: SkewParams):
    """Raw per-path output of the stopping walk: (position, discount weight, truncated mask)."""
    ivs = _normalize_stop_set(stop_set)
    dx = float(cfg.dx)
    n = int(cfg.n_paths)
    lo, hi = _grid_stop_set(ivs, dx)
    k0 = np.int64(round(x0 / dx))
    key = kernels.seed_key(cfg.seed)
    backend = cfg.resolved_backend()
    out_k = np.empty(n, dtype=np.int64)
    out_status = np.empty(n, dtype=np.int8)
    eps = r * dx * dx
    if cfg.scheme == "jump":
        s = math.exp(-eps)
        d = math.expm1(eps)
        lam = math.log1p(d + math.sqrt(d * (2.0 + d)))
        w_min = math.exp(-r * cfg.horizon(r))
        ends = [v for v in np.concatenate([lo, hi]) if abs(v) < _INF_IDX]
        specials = np.unique(np.array([0, *ends], dtype=np.int64))
        out_w = np.empty(n)
        kern = kernels.walk_stop_jump_nb if backend == "numba" else kernels.walk_stop_jump_np

        def fn(start, m, ok, ow, os_):
            kern(k0, start, m, p.beta, lo, hi, specials, s, lam, w_min, _MAX_JUMP_ITER, key, ok, ow, os_)

        _run_chunks(fn, n, cfg.workers, [out_k, out_w, out_status])
        weight = out_w
    else:
        max_steps = int(math.ceil(cfg.horizon(r) / (dx * dx)))
        out_steps = np.empty(n, dtype=np.int64)
        kern = kernels.walk_stop_step_nb if backend == "numba" else kernels.walk_stop_step_np

        def fn(start, m, ok, ost, os_):
            kern(k0, start, m, p.beta, lo, hi, max_steps, key, ok, ost, os_)

        _run_chunks(fn, n, cfg.workers, [out_k, out_steps, out_status])
        weight = np.exp(-r * out_steps * dx * dx)
    return out_k * dx, weight, out_status == kernels.TRUNCATED


def _in_set(x, ivs):
    return any(a <= x <= b for a, b in ivs)


def skew_walk_stop(x0: float, stop_set, r: float, g: Payoff, cfg: WalkConfig, p: SkewParams) -> MCEstimate:
    """Monte Carlo estimate of E_x0[exp(-r tau) g(X_tau)], tau the first entry into ``stop_set``.

    ``stop_set`` is a list of closed intervals ``(a, b)`` (infinite ends allowed, a
    bare number means an isolated point).  Truncated paths contribute 0.
    """
    ivs = _normalize_stop_set(stop_set)
    n = int(cfg.n_paths)
    if _in_set(float(x0), ivs):
        return MCEstimate(float(g.eval(x0)), 0.0, n, 0.0, cfg.seed, cfg.dx, cfg.scheme)
    pos, weight, trunc = simulate_stops(float(x0), ivs, r, cfg, p)
    vals = np.where(trunc, 0.0, weight * np.asarray(g.eval(pos), dtype=float))
    mean = float(np.mean(vals))
    se = float(np.std(vals, ddof=1) / math.sqrt(n)) if n > 1 else math.inf
    return MCEstimate(mean, se, n, float(np.mean(trunc)), cfg.seed, cfg.dx, cfg.scheme)


def walk_positions(x0: float, t: float, p: SkewParams, cfg: WalkConfig) -> np.ndarray:
    """Positions of the plain skew random walk after round(t / dx^2) steps."""
    dx = float(cfg.dx)
    n = int(cfg.n_paths)
    n_steps = int(round(t / (dx * dx)))
    key = kernels.seed_key(cfg.seed)
    out = np.empty(n, dtype=np.int64)
    kern = kernels.walk_fixed_nb if cfg.resolved_backend() == "numba" else kernels.walk_fixed_np
    _run_chunks(lambda s, m, o: kern(np.int64(round(x0 / dx)), s, m, p.beta, n_steps, key, o), n, cfg.workers, [out])
    return out * dx


# ---------------------------------------------------------------------------
# verification against the analytic solution


@dataclass
class VerifyRow:
    x: float
    analytic: float
    mc_mean: float
    std_error: float
    z: float
    truncated_fraction: float


@dataclass
class VerifyReport:
    rows: list = field(default_factory=list)
    bias_allowance: float = 0.0
    passed: bool = True
    flagged: bool = False
    regime: str = ""
    boundaries: dict = field(default_factory=dict)
    config: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return asdict(self)


def z_score(mc: float, se: float, analytic: float, allowance: float) -> float:
    """Signed excess of |mc - analytic| over ``allowance``, in standard errors."""
    diff = mc - analytic
    excess = max(0.0, abs(diff) - allowance)
    if excess == 0.0:
        return 0.0
    if se == 0.0:
        return math.copysign(math.inf, diff)
    return math.copysign(excess / se, diff)


def verify_value(
    sol,
    ctx,
    x_list: Sequence[float],
    cfg: WalkConfig,
    stop_set=None,
    bias_c: float = BIAS_C,
) -> VerifyReport:
    """Simulate the stopping rule of ``sol`` from each x and compare with the analytic V(x).

    ``stop_set`` overrides the rule being simulated (the analytic side always uses
    ``sol``), which is how perturbed-boundary negative controls are run.
    """
    from ..stopping_solver import stopping_set as _stopping_set, value_function

    V = value_function(sol, ctx)
    rule = _stopping_set(sol) if stop_set is None else stop_set
    report = VerifyReport(
        regime=sol.regime.value,
        boundaries=sol.boundaries(),
        config={**asdict(cfg), "generator": kernels.GENERATOR, "bias_c": bias_c},
    )
    for x in x_list:
        v = float(V(float(x)))
        est = skew_walk_stop(float(x), rule, ctx.p.r, ctx.g, cfg, ctx.p)
        allow = bias_c * cfg.dx * max(1.0, abs(v))
        z = z_score(est.mean, est.std_error, v, allow)
        report.rows.append(VerifyRow(float(x), v, est.mean, est.std_error, z, est.truncated_fraction))
        report.bias_allowance = max(report.bias_allowance, allow)
    report.passed = all(abs(row.z) <= 3.0 for row in report.rows)
    report.flagged = any(row.truncated_fraction >= 1e-3 for row in report.rows)
    return report


def perturb_stop_set(sol, factor: float) -> list:
    """Stop set of ``sol`` with every finite boundary multiplied by ``factor``."""
    from ..stopping_solver import stopping_set as _stopping_set

    scale = lambda v: v if math.isinf(v) else v * factor
    return [(scale(a), scale(b)) for a, b in _stopping_set(sol)]
