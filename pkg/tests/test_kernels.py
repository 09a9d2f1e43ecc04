import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import integrate, special

from avastcdf.kernels import (
    KernelError,
    ToleranceConfig,
    kearns_saul,
    lambert_w_m1,
    log_h,
    log_inc_beta,
    log_kummer_1f1_row1,
    log_lower_inc_gamma,
    log_upper_inc_gamma,
    psi_e,
)
from avastcdf.kernels import _log_1f1_identity, _log_1f1_series


def quad_log_upper_gamma(a, x):
    # integrate t^(a-1) e^-t on [x, inf) after factoring out the value at x
    val, _ = integrate.quad(lambda s: np.exp((a - 1) * np.log1p(s / x) - s), 0, np.inf, epsabs=0, epsrel=1e-13)
    return (a - 1) * math.log(x) - x + math.log(val)


def quad_log_1f1(b, x):
    # 1F1(1; b; x) = (b-1) int_0^1 e^{x u} (1-u)^{b-2} du, integrand scaled by its peak
    g = lambda u: x * u + (b - 2.0) * np.log1p(-u)  # noqa: E731
    u_star = max(0.0, 1.0 - (b - 2.0) / x) if x > 0 else 0.0
    g_star = g(u_star)
    val, _ = integrate.quad(
        lambda u: np.exp(g(u) - g_star), 0, 1, epsabs=0, epsrel=1e-13, limit=400, points=[u_star] if u_star > 0 else None
    )
    return g_star + math.log(b - 1.0) + math.log(val)


def quad_log_beta(lo, hi, a, b):
    val, _ = integrate.quad(lambda p: p ** (a - 1) * (1 - p) ** (b - 1), lo, hi, epsabs=0, epsrel=1e-13)
    return math.log(val)


class TestToleranceConfig:
    def test_defaults(self):
        cfg = ToleranceConfig()
        assert cfg.rel_tol == 1e-10 and cfg.abs_tol == 1e-14 and cfg.max_iter == 10_000

    @pytest.mark.parametrize("kw", [dict(rel_tol=0), dict(abs_tol=-1), dict(max_iter=0)])
    def test_rejects_invalid(self, kw):
        with pytest.raises(ValueError):
            ToleranceConfig(**kw)


class TestLogH:
    def test_trivial_values(self):
        assert log_h(0.0, 0.3) == pytest.approx(0.0, abs=1e-15)
        assert log_h(5.0, 0.0) == pytest.approx(0.0, abs=1e-15)

    def test_log_cosh(self):
        # direct two-term evaluation
        direct = math.log(0.5 * math.exp(-0.5) + 0.5 * math.exp(0.5))
        assert log_h(1.0, 0.5) == pytest.approx(direct, rel=1e-14)
        assert log_h(1.0, 0.5) == pytest.approx(0.1201145, abs=1e-7)

    def test_large_bet_is_stable(self):
        assert np.isfinite(log_h(800.0, 0.5))

    def test_domain(self):
        with pytest.raises(ValueError):
            log_h(1.0, 1.5)

    @given(st.floats(0, 0.999), st.floats(0, 1))
    def test_nonnegative(self, lam, z):
        assert log_h(lam, z) >= -1e-15

    @given(st.floats(0, 0.999), st.floats(0, 1), st.floats(0, 1))
    def test_concave_in_z(self, lam, z1, z2):
        mid = log_h(lam, 0.5 * (z1 + z2))
        assert mid >= 0.5 * (log_h(lam, z1) + log_h(lam, z2)) - 1e-12


class TestPsiE:
    def test_values(self):
        assert psi_e(0.0) == 0.0
        assert psi_e(0.5) == pytest.approx(-0.5 + math.log(2.0), rel=1e-14)
        assert psi_e(0.5) == pytest.approx(0.1931472, abs=1e-7)
        assert psi_e(0.9) == pytest.approx(1.4025851, abs=1e-7)

    def test_domain(self):
        with pytest.raises(ValueError):
            psi_e(1.0)

    @given(st.floats(0, 0.99), st.floats(0, 0.99))
    def test_convex_nonnegative(self, a, b):
        assert psi_e(a) >= 0
        assert psi_e(0.5 * (a + b)) <= 0.5 * (psi_e(a) + psi_e(b)) + 1e-12


class TestKearnsSaul:
    def test_values(self):
        assert kearns_saul(0.5) == 0.25
        assert kearns_saul(0.9) == pytest.approx(0.8 / (2 * math.log(9)), rel=1e-14)
        assert kearns_saul(0.9) == pytest.approx(0.1820478, abs=1e-7)
        assert kearns_saul(0.2) == pytest.approx(kearns_saul(0.8), rel=1e-14)

    def test_continuous_at_half(self):
        for eps in (1e-3, 1e-5, 1e-8):
            # log(p/(1-p)) = 2 atanh(2p-1) avoids cancellation near 1/2
            x = 2 * eps
            assert kearns_saul(0.5 + eps) == pytest.approx(x / (4 * math.atanh(x)), rel=1e-9)

    def test_domain(self):
        for p in (0.0, 1.0):
            with pytest.raises(ValueError):
                kearns_saul(p)

    def test_maximized_at_half(self):
        grid = np.arange(1, 1000) / 1000
        vals = kearns_saul(grid)
        assert np.all((vals > 0) & (vals <= 0.25))
        assert grid[np.argmax(vals)] == 0.5


class TestLambertW:
    def test_branch_point(self):
        assert lambert_w_m1(-math.exp(-1)) == pytest.approx(-1.0, abs=1e-7)

    def test_bisection_oracle(self):
        # independent bisection on w e^w = -0.1 over (-20, -1)
        lo, hi = -20.0, -1.0
        for _ in range(200):
            mid = 0.5 * (lo + hi)
            if mid * math.exp(mid) < -0.1:
                hi = mid
            else:
                lo = mid
        assert lambert_w_m1(-0.1) == pytest.approx(0.5 * (lo + hi), rel=1e-12)
        assert lambert_w_m1(-0.1) == pytest.approx(-3.5771521, abs=1e-7)

    def test_matches_scipy(self):
        for x in (-0.3, -1e-3, -1e-12, -1e-200):
            assert lambert_w_m1(x) == pytest.approx(special.lambertw(x, -1).real, rel=1e-12)

    def test_residual_random(self):
        rng = np.random.default_rng(7)
        for x in -np.exp(-1) * rng.random(1000):
            if x == 0:
                continue
            w = lambert_w_m1(x)
            assert w <= -1
            assert abs(w * math.exp(w) - x) <= 1e-10

    @pytest.mark.parametrize("x", [0.0, 0.1, -0.5])
    def test_domain(self, x):
        with pytest.raises(ValueError):
            lambert_w_m1(x)


class TestIncompleteGamma:
    def test_exponential_case(self):
        for x in (0.0, 0.5, 1.0, 30.0):
            assert log_upper_inc_gamma(1.0, x) == pytest.approx(-x, abs=1e-14)

    def test_c_tau_closed_form(self):
        log_gamma_lower = log_lower_inc_gamma(1.0, 1.0)
        c = math.exp(-1.0 - log_gamma_lower)
        assert c == pytest.approx(1.0 / (math.e - 1.0), rel=1e-13)
        assert c == pytest.approx(0.5819767, abs=1e-7)

    def test_quadrature(self):
        assert log_upper_inc_gamma(2.5, 3.0) == pytest.approx(quad_log_upper_gamma(2.5, 3.0), rel=1e-10)

    @pytest.mark.parametrize("a,x", [(0.5, 0.1), (1.0, 1.0), (5.0, 2.0), (30.0, 25.0), (200.0, 210.0), (1e4, 9e3)])
    def test_against_scipy(self, a, x):
        up = math.log(special.gammaincc(a, x)) + special.gammaln(a)
        lo = math.log(special.gammainc(a, x)) + special.gammaln(a)
        assert log_upper_inc_gamma(a, x) == pytest.approx(up, rel=1e-9)
        assert log_lower_inc_gamma(a, x) == pytest.approx(lo, rel=1e-9)

    def test_saturates_instead_of_overflow(self):
        assert np.isfinite(log_upper_inc_gamma(1e5, 1.0))


class TestKummer:
    def test_zero_argument(self):
        for b in (1.5, 2.0, 100.0):
            assert log_kummer_1f1_row1(b, 0.0) == 0.0

    def test_closed_form(self):
        assert log_kummer_1f1_row1(2.0, 1.0) == pytest.approx(math.log(math.e - 1), rel=1e-13)
        for x in (0.1, 5.0, 40.0, 300.0):
            assert log_kummer_1f1_row1(2.0, x) == pytest.approx(x + math.log(-math.expm1(-x) / x), rel=1e-11)

    def test_dual_path(self):
        a = np.asarray(_log_1f1_series(10.0, 50.0)).item()
        b = np.asarray(_log_1f1_identity(10.0, 50.0)).item()
        assert abs(a - b) / abs(b) <= 1e-8

    @pytest.mark.parametrize("b,x", [(17.0, 3.0), (17.0, 40.0), (60.0, 70.0), (300.0, 150.0), (1500.0, 1600.0)])
    def test_quadrature(self, b, x):
        assert log_kummer_1f1_row1(b, x) == pytest.approx(quad_log_1f1(b, x), rel=1e-8)

    def test_domain(self):
        with pytest.raises(ValueError):
            log_kummer_1f1_row1(1.0, 1.0)
        with pytest.raises(ValueError):
            log_kummer_1f1_row1(2.0, -1.0)

    @given(st.floats(1.01, 500), st.floats(0, 800), st.floats(0, 800))
    @settings(max_examples=200)
    def test_monotone_in_x(self, b, x1, x2):
        lo, hi = sorted((x1, x2))
        assert log_kummer_1f1_row1(b, lo) <= log_kummer_1f1_row1(b, hi) + 1e-9 * (1 + abs(hi))


class TestIncompleteBeta:
    def test_complete(self):
        assert log_inc_beta(0.0, 1.0, 2.0, 3.0) == pytest.approx(special.betaln(2.0, 3.0), rel=1e-14)

    def test_uniform(self):
        assert log_inc_beta(0.0, 0.5, 1.0, 1.0) == pytest.approx(math.log(0.5), rel=1e-14)

    def test_quadrature(self):
        assert log_inc_beta(0.3, 1.0, 6.0, 3.0) == pytest.approx(quad_log_beta(0.3, 1.0, 6.0, 3.0), rel=1e-10)

    @pytest.mark.parametrize(
        "lo,hi,a,b", [(0.01, 0.2, 0.5, 0.7), (0.5, 0.9, 20.0, 5.0), (0.001, 1.0, 0.3, 500.5), (0.2, 1.0, 3000.2, 7000.8)]
    )
    def test_quadrature_regimes(self, lo, hi, a, b):
        if a > 100:
            # quadrature around the posterior mode
            mode = (a - 1) / (a + b - 2)
            width = 40 * math.sqrt(mode * (1 - mode) / (a + b))
            f = lambda p: math.exp((a - 1) * math.log(p / mode) + (b - 1) * math.log((1 - p) / (1 - mode)))  # noqa: E731
            val, _ = integrate.quad(f, max(lo, mode - width), min(hi, mode + width), epsabs=0, epsrel=1e-13)
            ref = math.log(val) + (a - 1) * math.log(mode) + (b - 1) * math.log(1 - mode)
        else:
            ref = quad_log_beta(lo, hi, a, b)
        assert log_inc_beta(lo, hi, a, b) == pytest.approx(ref, rel=1e-8)

    @pytest.mark.parametrize(
        "lo,hi,a,b", [(0.476, 1.0, 63.5, 6706.5), (0.3, 0.35, 2.0, 4000.0), (0.0, 0.02, 5000.0, 30.0), (0.9, 0.95, 1.5, 900.0)]
    )
    def test_underflowing_tail(self, lo, hi, a, b):
        # the mass sits against the endpoint nearest the mode; integrate outward from it
        edge = lo if lo >= a / (a + b) else hi
        g = lambda p: (a - 1) * math.log(p / edge) + (b - 1) * math.log1p(-(p - edge) / (1 - edge))  # noqa: E731
        val, _ = integrate.quad(lambda p: math.exp(g(p)), lo, hi, epsabs=0, epsrel=1e-12, limit=500, points=[edge])
        ref = (a - 1) * math.log(edge) + (b - 1) * math.log1p(-edge) + math.log(val)
        assert ref < -710
        assert log_inc_beta(lo, hi, a, b) == pytest.approx(ref, rel=1e-10)
        vec = log_inc_beta(np.array([lo, lo]), hi, a, b)
        assert np.all(vec == log_inc_beta(lo, hi, a, b))

    def test_empty_interval_is_log_zero(self):
        assert log_inc_beta(0.4, 0.4, 2.0, 2.0) == -np.inf

    @given(st.floats(0, 1), st.floats(0, 1), st.floats(0, 1), st.floats(0.1, 50), st.floats(0.1, 50))
    @settings(max_examples=200)
    def test_additive_over_intervals(self, p1, p2, p3, a, b):
        lo, mid, hi = sorted((p1, p2, p3))
        if hi - lo < 1e-9:
            return
        whole = log_inc_beta(lo, hi, a, b)
        parts = np.logaddexp(log_inc_beta(lo, mid, a, b), log_inc_beta(mid, hi, a, b))
        if np.isfinite(whole) and whole > -600:
            assert parts == pytest.approx(whole, rel=1e-9, abs=1e-9)


class TestKernelError:
    def test_iteration_cap_reported(self):
        with pytest.raises(KernelError):
            log_kummer_1f1_row1(5.0, 4.0, ToleranceConfig(max_iter=1))
