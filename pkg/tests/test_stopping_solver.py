import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import optimize

from skewstop import sbm_core, stopping_solver as ss
from skewstop.errors import AssumptionViolation, DomainError
from skewstop.excessive_ops import OperatorContext, L_psi, maximizer_set, ratio_u
from skewstop.payoff import Payoff, shifted_call
from skewstop.sbm_core import SkewParams
from skewstop.stopping_solver import (
    Regime,
    SingleBoundary,
    Tangency,
    ThreeBoundary,
    classify,
    continuation_region,
    critical_beta,
    critical_function,
    critical_rate,
    solve,
    stopping_set,
    system_residuals,
    value_function,
)

X_GRID = np.linspace(-2, 3, 41)


def ctx_of(beta, r, K=1.0):
    return OperatorContext(SkewParams(beta, r), shifted_call(K))


def solved(beta, r, K=1.0):
    ctx = ctx_of(beta, r, K)
    return solve(ctx), ctx


def in_union(x, intervals):
    return any(a < x < b for a, b in intervals)


class TestCriticalRate:
    def test_beta_one(self):
        cr = critical_rate(1.0, 1.0)
        assert cr.theta_hat == pytest.approx(1.64132, abs=1e-5)
        assert cr.r_hat == pytest.approx(1.34697, abs=1e-5)

    def test_left_edge(self):
        assert abs(critical_rate(0.5001, 1.0).theta_hat - 1.0) < 0.01

    def test_rate_flip_at_beta_055(self):
        assert critical_rate(0.55, 1.0).r_hat == pytest.approx(0.5983, abs=1e-4)

    @given(st.floats(0.501, 1.0), st.floats(0.2, 5.0))
    @settings(max_examples=50)
    def test_root_and_bracket(self, beta, K):
        cr = critical_rate(beta, K)
        assert abs(critical_function(cr.theta_hat, beta, K)) < 1e-12
        assert 1 / K <= cr.theta_hat
        if beta < 1:
            assert cr.theta_hat <= (1 + math.log(beta / (1 - beta))) / K
        assert cr.r_hat == pytest.approx(cr.theta_hat**2 / 2, rel=1e-15)

    def test_scaling_in_K(self):
        # theta_hat K depends on beta only
        assert critical_rate(0.7, 2.5).theta_hat * 2.5 == pytest.approx(critical_rate(0.7, 1.0).theta_hat, rel=1e-12)

    def test_increasing_in_beta(self):
        th = [critical_rate(b, 1.0).theta_hat for b in np.linspace(0.51, 1.0, 30)]
        assert np.all(np.diff(th) > 0)

    @pytest.mark.parametrize("beta", [0.5, 0.3, 1.2])
    def test_domain(self, beta):
        with pytest.raises(DomainError):
            critical_rate(beta, 1.0)


class TestCriticalBeta:
    def test_beta_flip_at_r_095(self):
        assert critical_beta(0.95, 1.0) == pytest.approx(0.7445, abs=1e-4)

    def test_round_trip(self):
        r = critical_rate(0.8, 1.3).r_hat
        assert critical_beta(r, 1.3) == pytest.approx(0.8, abs=1e-9)

    def test_out_of_range(self):
        assert critical_beta(0.3, 1.0) is None
        assert critical_beta(2.0, 1.0) is None


class TestClassify:
    def test_examples(self):
        assert classify(ctx_of(0.55, 0.3)) is Regime.SINGLE
        assert classify(ctx_of(0.55, 0.95)) is Regime.THREE
        b = critical_beta(0.95, 1.0)
        assert classify(ctx_of(b, 0.95)) is Regime.TANGENCY

    def test_requires_call(self):
        g = Payoff.from_functions(lambda x: np.maximum(np.asarray(x) + 1, 0), lambda x: 1.0)
        with pytest.raises(DomainError):
            classify(OperatorContext(SkewParams(0.6, 0.5), g))

    @pytest.mark.parametrize("beta", [0.5, 0.3])
    def test_requires_upward_skew(self, beta):
        with pytest.raises(DomainError):
            solve(ctx_of(beta, 0.5))


class TestSingle:
    def test_first_order_condition(self):
        sol, ctx = solved(0.75, 0.5, K=0.5)
        assert isinstance(sol, SingleBoundary)
        assert abs(L_psi(sol.x_star, ctx)) < 1e-10
        assert sol.x_star == pytest.approx(0.750, abs=1e-3)
        assert maximizer_set(ctx)[0] == pytest.approx(sol.x_star, abs=1e-10)

    def test_reference_config(self):
        sol, _ = solved(0.55, 0.3)
        assert sol.x_star == pytest.approx(0.430658068, abs=1e-9)

    def test_requires_regime(self):
        with pytest.raises(AssumptionViolation):
            ss.solve_single(ctx_of(0.55, 0.95))

    def test_custom_payoff_without_smoothness(self):
        g = Payoff.from_functions(lambda x: np.maximum(np.asarray(x, dtype=float) + 1, 0), lambda x: 1.0, kinks=(-1.0,))
        with pytest.raises(AssumptionViolation):
            solve(OperatorContext(SkewParams(0.6, 0.2), g))

    def test_custom_payoff_matches_call(self):
        f = lambda x: np.maximum(np.asarray(x, dtype=float) + 1, 0)
        d = lambda x: np.where(np.asarray(x) >= -1, 1.0, 0.0)
        g = Payoff.from_functions(f, d, d, lambda x: np.zeros_like(np.asarray(x, dtype=float)), smooth_from=-0.5, kinks=(-1.0,))
        sol_custom = solve(OperatorContext(SkewParams(0.55, 0.3), g))
        sol_call, _ = solved(0.55, 0.3)
        assert sol_custom.x_star == pytest.approx(sol_call.x_star, abs=1e-10)


class TestTangency:
    def test_closed_form(self):
        beta, K = 0.65, 1.0
        r = critical_rate(beta, K).r_hat
        sol, ctx = solved(beta, r, K)
        assert isinstance(sol, Tangency)
        th = ctx.theta
        e = math.exp(1 - th * K)
        expect = math.log(beta * e + math.sqrt(beta**2 * e**2 + 2 * beta - 1)) / th
        assert sol.x_star == pytest.approx(expect, abs=1e-10)
        assert sol.x1_star == pytest.approx(1 / th - K, abs=1e-15)
        u1, u2 = ratio_u(sol.x1_star, ctx), ratio_u(sol.x_star, ctx)
        assert abs(u1 - u2) < 1e-9 * max(1, u1)

    def test_regions(self):
        beta = 0.65
        sol, _ = solved(beta, critical_rate(beta, 1.0).r_hat)
        assert stopping_set(sol)[0] == (sol.x1_star, sol.x1_star)
        assert continuation_region(sol) == [(-math.inf, sol.x1_star), (sol.x1_star, sol.x_star)]


def brute_force_window(ctx, x1, n=300):
    """Minimize the squared system residuals on a grid, then polish with Nelder-Mead."""
    th = ctx.theta
    Y1 = np.linspace(x1, 0, n + 2)[1:-1]
    Y2 = np.linspace(0, 2 / th, n + 2)[1:-1]
    best = (math.inf, None)
    for a in Y1:
        for b in Y2:
            r1, r2 = system_residuals(a, b, ctx)
            v = r1 * r1 + r2 * r2
            if v < best[0]:
                best = (v, (a, b))
    f = lambda v: sum(t * t for t in system_residuals(v[0], v[1], ctx)) if x1 < v[0] < 0 < v[1] else 1e9
    res = optimize.minimize(f, best[1], method="Nelder-Mead", options={"xatol": 1e-12, "fatol": 1e-30, "maxiter": 4000})
    return res.x


class TestThree:
    def test_reference_config(self):
        sol, ctx = solved(0.55, 0.95)
        assert isinstance(sol, ThreeBoundary)
        assert sol.x1_star == pytest.approx(1 / math.sqrt(1.9) - 1, abs=1e-15)
        assert sol.x1_star < sol.y1_star < 0 < sol.y2_star
        assert max(map(abs, system_residuals(sol.y1_star, sol.y2_star, ctx))) < 1e-10
        assert sol.y1_star == pytest.approx(-0.0535104464, abs=1e-9)
        assert sol.y2_star == pytest.approx(0.0516657185, abs=1e-9)
        assert sol.method == "curves"

    @pytest.mark.parametrize("beta,r", [(0.55, 0.95), (0.7, 1.2), (0.6, 2.0)])
    def test_brute_force_oracle(self, beta, r):
        sol, ctx = solved(beta, r)
        y1, y2 = brute_force_window(ctx, sol.x1_star, n=120)
        assert y1 == pytest.approx(sol.y1_star, abs=1e-6)
        assert y2 == pytest.approx(sol.y2_star, abs=1e-6)

    def test_merge_toward_critical_beta(self):
        bstar = critical_beta(0.95, 1.0)
        gaps = []
        for b in np.linspace(0.6, bstar - 1e-6, 8):
            sol, _ = solved(b, 0.95)
            gaps.append(sol.y1_star - sol.x1_star)
        assert np.all(np.diff(gaps) < 0)
        assert gaps[-1] < 1e-2

    def test_condition_ii_not_needed_for_call(self):
        # (ii) fails between r_hat and r*, yet the window exists
        sol, ctx = solved(0.55, 0.65)
        assert isinstance(sol, ThreeBoundary)
        assert sol.condition_ii is False
        assert max(map(abs, sol.residuals)) < 1e-10

    def test_condition_ii_enforced_on_request(self):
        with pytest.raises(AssumptionViolation):
            ss.solve_three(ctx_of(0.55, 0.65), enforce_condition_ii=True)

    def test_custom_payoff_three(self):
        f = lambda x: np.maximum(np.asarray(x, dtype=float) + 1, 0)
        d = lambda x: np.where(np.asarray(x) >= -1, 1.0, 0.0)
        g = Payoff.from_functions(f, d, d, lambda x: np.zeros_like(np.asarray(x, dtype=float)), smooth_from=-0.9, kinks=(-1.0,))
        sol = solve(OperatorContext(SkewParams(0.55, 0.95), g))
        ref, _ = solved(0.55, 0.95)
        assert isinstance(sol, ThreeBoundary)
        assert sol.y1_star == pytest.approx(ref.y1_star, abs=1e-9)
        assert sol.y2_star == pytest.approx(ref.y2_star, abs=1e-9)
        # the condition is enforced for custom payoffs by default
        with pytest.raises(AssumptionViolation):
            solve(OperatorContext(SkewParams(0.55, 0.65), g))

    def test_too_many_maximizers(self, monkeypatch):
        g = Payoff.from_functions(lambda x: np.maximum(np.asarray(x, dtype=float) + 1, 0), lambda x: 1.0)
        monkeypatch.setattr(ss, "maximizer_set", lambda ctx: [-0.5, 0.2, 0.9])
        with pytest.raises(AssumptionViolation):
            solve(OperatorContext(SkewParams(0.6, 0.5), g))

    def test_regime_continuity(self):
        beta = 0.55
        r_hat = critical_rate(beta, 1.0).r_hat
        tan, ctx_t = solved(beta, r_hat)
        above, ctx_a = solved(beta, r_hat * (1 + 1e-6))
        below, ctx_b = solved(beta, r_hat * (1 - 1e-6))
        assert isinstance(above, ThreeBoundary) and isinstance(below, SingleBoundary)
        assert above.y1_star - above.x1_star < 1e-2
        Vt = value_function(tan, ctx_t)(X_GRID)
        np.testing.assert_allclose(value_function(above, ctx_a)(X_GRID), Vt, atol=1e-6)
        np.testing.assert_allclose(value_function(below, ctx_b)(X_GRID), Vt, atol=1e-6)


CONFIGS = [(0.55, 0.95), (0.55, 0.3), (0.75, 0.5), (0.9, 2.0), (0.6, 0.65)]


class TestValueFunction:
    @pytest.mark.parametrize("beta,r", CONFIGS)
    def test_majorant_and_bound(self, beta, r):
        sol, ctx = solved(beta, r)
        V = value_function(sol, ctx)
        x = np.linspace(-3, 4, 2001)
        v = V(x)
        g = ctx.g.eval(x)
        assert np.all(v >= g - 1e-14)
        assert np.all(v <= V.ratio_bound(x) + 1e-12)
        cont = np.array([in_union(t, continuation_region(sol)) for t in x])
        strict = cont & (g > 0)
        assert np.all(v[strict] > g[strict])

    @pytest.mark.parametrize("beta,r", CONFIGS)
    def test_continuous(self, beta, r):
        sol, ctx = solved(beta, r)
        V = value_function(sol, ctx)
        for b in [v for v in sol.boundaries().values() if v is not None] + [0.0]:
            assert V(b - 1e-9) == pytest.approx(V(b), abs=1e-7)
            assert V(b + 1e-9) == pytest.approx(V(b), abs=1e-7)

    def test_window_endpoints(self):
        sol, ctx = solved(0.55, 0.95)
        V = value_function(sol, ctx)
        assert V(sol.y1_star) == ctx.g.eval(sol.y1_star)
        assert V(sol.y2_star) == ctx.g.eval(sol.y2_star)
        inside = np.linspace(sol.y1_star, sol.y2_star, 101)[1:-1]
        assert np.all(V(inside) - ctx.g.eval(inside) > 0)

    def test_reference_values(self):
        sol, ctx = solved(0.55, 0.95)
        V = value_function(sol, ctx)
        np.testing.assert_allclose(V(np.array([-0.5, 0.0, 0.5, 2.0])), [0.53167413501, 1.00262434076, 1.5, 3.0], atol=1e-10)

    def test_smooth_fit(self):
        # V is C^1 across the boundaries away from the skew point
        sol, ctx = solved(0.55, 0.95)
        V = value_function(sol, ctx)
        h = 1e-6
        for b in (sol.x1_star, sol.y1_star, sol.y2_star):
            left = (V(b) - V(b - h)) / h
            right = (V(b + h) - V(b)) / h
            assert left == pytest.approx(right, abs=1e-4)

    @pytest.mark.parametrize("beta,r", CONFIGS)
    def test_scale_kink_at_origin(self, beta, r):
        sol, ctx = solved(beta, r)
        V = value_function(sol, ctx)
        h = 1e-6
        d_minus = (V(0.0) - V(-h)) * (1 - beta) / h
        d_plus = (V(h) - V(0.0)) * beta / h
        assert d_minus >= d_plus - 1e-5

    @given(st.floats(0.51, 0.95), st.floats(0.05, 3.0))
    @settings(max_examples=30, deadline=None)
    def test_origin_in_continuation(self, beta, r):
        sol, ctx = solved(beta, r)
        assert value_function(sol, ctx)(0.0) > ctx.g.eval(0.0)
        assert in_union(0.0, continuation_region(sol))

    @given(st.floats(0.51, 0.9), st.floats(0.01, 0.05), st.floats(0.1, 2.5))
    @settings(max_examples=20, deadline=None)
    def test_monotone_in_beta(self, beta, step, r):
        s1, c1 = solved(beta, r)
        s2, c2 = solved(beta + step, r)
        assert np.all(value_function(s1, c1)(X_GRID) <= value_function(s2, c2)(X_GRID) + 1e-10)

    @given(st.floats(0.51, 0.95), st.floats(0.1, 2.0), st.floats(0.01, 0.3))
    @settings(max_examples=20, deadline=None)
    def test_monotone_in_r(self, beta, r, step):
        s1, c1 = solved(beta, r)
        s2, c2 = solved(beta, r + step)
        assert np.all(value_function(s1, c1)(X_GRID) >= value_function(s2, c2)(X_GRID) - 1e-10)

    def test_symmetric_exit_transform(self):
        a = 0.7
        lo, hi = sbm_core.exit_transforms(0.0, -a, a, SkewParams(0.5, 0.5))
        assert lo == pytest.approx(1 / (2 * math.cosh(a)))


class TestRegions:
    def test_single(self):
        sol = SingleBoundary(1.0)
        assert continuation_region(sol) == [(-math.inf, 1.0)]
        assert stopping_set(sol) == [(1.0, math.inf)]

    def test_three_contains_origin(self):
        sol, _ = solved(0.55, 0.95)
        C = continuation_region(sol)
        assert C[0] == (-math.inf, sol.x1_star)
        assert in_union(0.0, C)

    def test_boundaries_dict(self):
        sol, _ = solved(0.55, 0.3)
        assert sol.boundaries() == {"x1_star": None, "y1_star": None, "y2_star": None, "x_star": sol.x_star}
