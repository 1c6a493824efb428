"""Acceptance gate: one test per primary criterion, each with its tolerance and time budget."""

import math
import time

import numpy as np
from scipy import integrate, stats

from skewstop import sbm_core
from skewstop.cli import cmd_sweep_beta, cmd_sweep_r, parse_grid
from skewstop.excessive_ops import OperatorContext
from skewstop.payoff import shifted_call
from skewstop.sbm_core import DensityPoint, SkewParams
from skewstop.simulator import WalkConfig, exact_sample, verify_value
from skewstop.simulator.engine import BIAS_C
from skewstop.stopping_solver import (
    ThreeBoundary,
    continuation_region,
    critical_rate,
    solve,
    system_residuals,
    value_function,
)

G = shifted_call(1.0)
X41 = np.linspace(-2.0, 3.0, 41)
GRID_BETAS = (0.55, 0.75, 0.95)
GRID_RATES = (0.125, 0.5, 2.0)

# every configuration solved by criteria 7-10, collected for criterion 11
SOLVED = {}


def solved(beta, r):
    key = (round(beta, 12), round(r, 12))
    if key not in SOLVED:
        ctx = OperatorContext(SkewParams(beta, r), G)
        SOLVED[key] = (solve(ctx), ctx)
    return SOLVED[key]


class Timer:
    def __enter__(self):
        self.t0 = time.perf_counter()
        return self

    def __exit__(self, *exc):
        self.elapsed = time.perf_counter() - self.t0


def nested(inner, outer, tol=1e-12):
    """Every open interval of ``inner`` lies inside some interval of ``outer``."""
    return all(any(c - tol <= a and b <= d + tol for c, d in outer) for a, b in inner)


def test_01_critical_rate_anchor(report_criterion):
    with Timer() as t:
        th = critical_rate(1.0, 1.0).theta_hat
    ok = abs(th - 1.64132) <= 1e-4 and t.elapsed < 1.0
    report_criterion(1, ok, f"theta_hat(beta=1, K=1) = {th:.10f} (target 1.64132 +- 1e-4), {t.elapsed:.3f}s")
    assert ok


def test_02_left_edge_limit(report_criterion):
    with Timer() as t:
        th = critical_rate(0.5001, 1.0).theta_hat
    ok = abs(th - 1.0) < 0.01 and t.elapsed < 1.0
    report_criterion(2, ok, f"theta_hat(beta=0.5001) = {th:.6f}, |theta_hat - 1| < 0.01, {t.elapsed:.3f}s")
    assert ok


def test_03_sweep_beta_flip(report_criterion):
    with Timer() as t:
        table = cmd_sweep_beta(1.0, 0.95, parse_grid("0.51:0.99:0.01"))
    ok = table.flip is not None and abs(table.flip - 0.7445) <= 1e-3 and t.elapsed < 10.0
    report_criterion(3, ok, f"beta* = {table.flip:.6f} (target 0.7445 +- 1e-3), {t.elapsed:.2f}s")
    assert ok


def test_04_sweep_r_flip(report_criterion):
    with Timer() as t:
        table = cmd_sweep_r(1.0, 0.55, parse_grid("0.05:1.5:0.05"))
    ok = table.flip is not None and abs(table.flip - 0.5983) <= 1e-3 and t.elapsed < 10.0
    report_criterion(4, ok, f"r_hat = {table.flip:.6f} (target 0.5983 +- 1e-3), {t.elapsed:.2f}s")
    assert ok


def test_05_wronskian(report_criterion):
    x = np.concatenate([-np.logspace(-4, 1, 50)[::-1], np.logspace(-4, 1, 50)])
    worst = 0.0
    with Timer() as t:
        for beta in GRID_BETAS:
            for r in GRID_RATES:
                worst = max(worst, float(np.max(np.abs(sbm_core.wronskian_residual(x, SkewParams(beta, r))))))
    ok = worst < 1e-12 and t.elapsed < 1.0
    report_criterion(5, ok, f"max |Wronskian residual| = {worst:.2e} over 100 x 9 points, {t.elapsed:.3f}s")
    assert ok


def test_06_normalization_and_skew_mass(report_criterion):
    worst_norm = worst_mass = 0.0
    with Timer() as t:
        for beta in GRID_BETAS:
            for r in GRID_RATES:
                p = SkewParams(beta, r)
                for x, tt in [(-1.0, 0.5), (0.0, 1.0), (0.7, 2.0)]:
                    f = lambda y: sbm_core.transition_density(DensityPoint(x, y, tt), p)
                    span = 40 * math.sqrt(tt) + abs(x)
                    total = sum(
                        integrate.quad(f, a, b, epsabs=1e-13, epsrel=1e-13, limit=200)[0] for a, b in ((-span, 0.0), (0.0, span))
                    )
                    worst_norm = max(worst_norm, abs(total - 1.0))
                mass = 1.0 - sbm_core.transition_cdf(DensityPoint(0.0, -1e-300, 1.0), p)
                worst_mass = max(worst_mass, abs(mass - beta))
    ok = worst_norm < 1e-8 and worst_mass < 1e-8 and t.elapsed < 5.0
    report_criterion(6, ok, f"max |int density - 1| = {worst_norm:.1e}, max |P_0[X_t>=0] - beta| = {worst_mass:.1e}, {t.elapsed:.2f}s")
    assert ok


def test_07_three_boundary_residuals(report_criterion):
    with Timer() as t:
        sol, ctx = solved(0.55, 0.95)
        res = system_residuals(sol.y1_star, sol.y2_star, ctx)
    x1_exact = 1 / math.sqrt(1.9) - 1
    ok = (
        isinstance(sol, ThreeBoundary)
        and max(map(abs, res)) < 1e-10
        and abs(sol.x1_star - x1_exact) <= 2 * np.spacing(abs(x1_exact))
        and sol.x1_star < sol.y1_star < 0 < sol.y2_star
        and t.elapsed < 1.0
    )
    report_criterion(
        7,
        ok,
        f"x1*={sol.x1_star:.14f} y1*={sol.y1_star:.10f} y2*={sol.y2_star:.10f} residuals=({res[0]:.1e}, {res[1]:.1e}), {t.elapsed:.3f}s",
    )
    assert ok


def test_08_monte_carlo_agreement(report_criterion):
    cfg = WalkConfig(dx=1e-3, n_paths=100_000, seed=20260101)
    xs = [-0.5, 0.0, 0.5, 2.0]
    details = []
    ok = True
    with Timer() as t:
        for beta, r in [(0.55, 0.95), (0.55, 0.3)]:
            sol, ctx = solved(beta, r)
            rep = verify_value(sol, ctx, xs, cfg)
            ok &= rep.passed and not rep.flagged
            zs = ", ".join(f"{row.z:+.2f}" for row in rep.rows)
            details.append(f"{sol.regime.value}(r={r}) z=[{zs}]")
    ok = ok and t.elapsed < 300.0
    report_criterion(8, ok, f"{'; '.join(details)}; allowance {BIAS_C}*dx*max(1,|V|), {t.elapsed:.1f}s")
    assert ok


def test_09_origin_in_continuation(report_criterion):
    worst = math.inf
    with Timer() as t:
        for beta in (0.51, 0.6, 0.75, 0.9):
            for r in (0.3, 0.95, 2.0):
                sol, ctx = solved(beta, r)
                worst = min(worst, float(value_function(sol, ctx)(0.0)) - float(G.eval(0.0)))
    ok = worst > 0 and t.elapsed < 5.0
    report_criterion(9, ok, f"min V(0) - g(0) = {worst:.3e} over 12 configs, {t.elapsed:.2f}s")
    assert ok


def test_10_comparative_statics(report_criterion):
    tol = 1e-10
    worst_beta = worst_r = -math.inf
    nest_ok = True
    betas = np.round(np.arange(0.55, 0.951, 0.05), 10)
    rates = np.round(np.arange(0.1, 2.001, 0.1), 10)
    with Timer() as t:
        for r in (0.3, 0.95, 2.0):
            prev = None
            for beta in betas:
                sol, ctx = solved(beta, r)
                v = value_function(sol, ctx)(X41)
                if prev is not None:
                    worst_beta = max(worst_beta, float(np.max(prev[0] - v)))
                    nest_ok &= nested(prev[1], continuation_region(sol))
                prev = (v, continuation_region(sol))
        for beta in GRID_BETAS:
            prev = None
            for r in rates:
                sol, ctx = solved(beta, r)
                v = value_function(sol, ctx)(X41)
                if prev is not None:
                    worst_r = max(worst_r, float(np.max(v - prev[0])))
                    nest_ok &= nested(continuation_region(sol), prev[1])
                prev = (v, continuation_region(sol))
    ok = worst_beta <= tol and worst_r <= tol and nest_ok and t.elapsed < 10.0
    report_criterion(
        10,
        ok,
        f"max decrease in beta {worst_beta:.1e}, max increase in r {worst_r:.1e}, regions nest: {nest_ok}, {t.elapsed:.2f}s",
    )
    assert ok


def test_11_majorant_and_ratio_bound(report_criterion):
    # make sure the configurations of 7-10 exist even when this test runs alone
    solved(0.55, 0.95)
    for beta in (0.51, 0.6, 0.75, 0.9):
        for r in (0.3, 0.95, 2.0):
            solved(beta, r)
    worst_low = worst_high = -math.inf
    with Timer() as t:
        for sol, ctx in SOLVED.values():
            V = value_function(sol, ctx)
            v = V(X41)
            worst_low = max(worst_low, float(np.max(G.eval(X41) - v)))
            worst_high = max(worst_high, float(np.max(v - V.ratio_bound(X41))))
    ok = worst_low <= 0 and worst_high <= 1e-12 and t.elapsed < 5.0
    report_criterion(
        11,
        ok,
        f"{len(SOLVED)} configs: max(g - V) = {worst_low:.1e}, max(V - psi sup g/psi) = {worst_high:.1e}, {t.elapsed:.2f}s",
    )
    assert ok


def test_12_exact_step_sampler(report_criterion):
    beta, n = 0.8, 100_000
    with Timer() as t:
        x = exact_sample(0.0, 1.0, SkewParams(beta, 1.0), n, seed=12)
        sym = exact_sample(0.0, 1.0, SkewParams(0.5, 1.0), n, seed=13)
        ks = stats.kstest(sym, "norm")
    frac = float(np.mean(x >= 0))
    sign_ok = abs(frac - beta) <= 3 * math.sqrt(beta * (1 - beta) / n)
    se = x.std(ddof=1) / math.sqrt(n)
    mean_target = (2 * beta - 1) * math.sqrt(2 / math.pi)
    mean_ok = abs(x.mean() - mean_target) <= 3 * se
    ok = sign_ok and mean_ok and ks.pvalue > 0.01 and t.elapsed < 30.0
    report_criterion(
        12,
        ok,
        f"P(X>=0)={frac:.4f} (beta 0.8), mean={x.mean():.4f} vs {mean_target:.4f} (3SE={3 * se:.4f}), KS p={ks.pvalue:.3f}, {t.elapsed:.2f}s",
    )
    assert ok
