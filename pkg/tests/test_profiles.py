"""Closed-form constants, profiles and bounds against independent arithmetic."""

import math

import numpy as np
import pytest

from fdalab.profiles import (
    ParameterError,
    Params,
    ProfileSpec,
    barenblatt,
    compute_a_star,
    derive_constants,
    flat_decay_bound,
    lower_bound_amplitude,
    positivity_transform,
    subsolution,
    supersolution,
)

P25 = Params(N=2, m=0.5, critical=True)
P23 = Params(N=2, m=0.3, critical=True)
P15 = Params(N=1, m=0.5, critical=True)


class TestParams:
    def test_critical_fills_q(self):
        assert P25.q == 1.5
        assert P23.q == 1.3
        assert P15.q == 2.5

    def test_critical_rejects_wrong_q(self):
        with pytest.raises(ParameterError):
            Params(N=2, m=0.5, q=1.4, critical=True)
        # the exact critical value is accepted
        assert Params(N=2, m=0.5, q=1.5, critical=True).q == 1.5

    @pytest.mark.parametrize("m", [0.0, 1.0, 1.2, -0.1])
    def test_m_out_of_range(self, m):
        with pytest.raises(ParameterError):
            Params(N=2, m=m, q=1.5)

    def test_m_below_mc_in_high_dimension(self):
        # m_c = 1/3 in dimension 3
        with pytest.raises(ParameterError):
            Params(N=3, m=0.3, q=1.5)
        assert Params(N=3, m=0.4, q=1.5).m_c == pytest.approx(1 / 3)

    def test_q_must_exceed_one(self):
        with pytest.raises(ParameterError):
            Params(N=2, m=0.5, q=1.0)
        with pytest.raises(ParameterError):
            Params(N=2, m=0.5)  # q missing, not critical

    @pytest.mark.parametrize("bad_n", [0, -1, 2.0, 2.5, True])
    def test_integer_dimension_only(self, bad_n):
        with pytest.raises(ParameterError):
            Params(N=bad_n, m=0.5, q=1.5)


class TestDeriveConstants:
    def test_reference_point_exact(self):
        c = derive_constants(P25)
        assert c.q_star == 1.5
        assert c.b0 == pytest.approx(0.5, abs=1e-14)
        assert c.k == pytest.approx(2.25, abs=1e-14)
        assert c.delta == pytest.approx(0.875, abs=1e-14)
        assert c.gamma == pytest.approx(1.0, abs=1e-14)
        assert c.alpha == pytest.approx(2.0, abs=1e-14)
        assert c.r1 == pytest.approx(2.0, abs=1e-14)

    def test_time_corrected_branch_constants(self):
        c = derive_constants(P23)
        assert c.gamma == pytest.approx(1.0 / 1.4, rel=1e-14)
        # arithmetic oracle: max(4q/(1-m), 2^(m+2) q/(q-1))
        assert c.s0 == pytest.approx(max(4 * 1.3 / 0.7, 2**2.3 * 1.3 / 0.3), rel=1e-14)

    def test_stationary_branch_has_zero_minimal_time(self):
        # m >= (N-1)/N: the subsolution is time-independent and valid for all s
        assert derive_constants(P25).s0 == 0.0
        assert derive_constants(P15).s0 == 0.0

    def test_one_dimensional_constants(self):
        c = derive_constants(P15)
        assert P15.m_c == 0.0
        assert c.q_star == 2.5
        assert c.b0 == pytest.approx(1.0 / 3.0, rel=1e-14)

    def test_k_window_sweep(self):
        # k in (N, 2/(1-m)) across the admissible region, 100 pairs
        rng = np.random.default_rng(42)
        count = 0
        while count < 100:
            N = int(rng.integers(1, 11))
            m_c = max(N - 2, 0) / N
            m = float(rng.uniform(m_c + 1e-3, 1 - 1e-3))
            c = derive_constants(Params(N=N, m=m, critical=True))
            assert N < c.k < 2.0 / (1.0 - m), (N, m, c.k)
            assert c.b0 > 0.0 and c.delta > 0.0 and c.r1 > 0.0
            count += 1


class TestBarenblattProfile:
    def test_origin_value(self):
        assert barenblatt(1.0, 0.0, P25) == 1.0

    def test_reference_value(self):
        # (1 + 0.5 * 2)^(-2) = 0.25
        assert barenblatt(1.0, math.sqrt(2.0), P25) == pytest.approx(0.25, rel=1e-14)

    def test_monotone_in_r_and_A(self):
        r = np.linspace(0.0, 20.0, 200)
        v = barenblatt(1.0, r, P25)
        assert np.all(np.diff(v) < 0.0)
        assert np.all(barenblatt(2.0, r, P25) < v)
        assert np.all(v > 0.0)

    def test_far_field_power_law(self):
        # r^(2/(1-m)) * profile -> b0^(1/(m-1)); within 1% at r = 1e2, 1e3
        b0 = derive_constants(P25).b0
        limit = b0 ** (1.0 / (P25.m - 1.0))
        for r in (1e2, 1e3):
            val = r ** (2.0 / (1.0 - P25.m)) * barenblatt(1.0, r, P25)
            assert val == pytest.approx(limit, rel=1e-2)

    def test_rejects_nonpositive_A(self):
        with pytest.raises(ParameterError):
            barenblatt(0.0, 1.0, P25)


class TestComparisonProfiles:
    def test_stationary_branch_equals_profile(self):
        r = np.linspace(0.0, 5.0, 50)
        assert np.array_equal(subsolution(1.0, 100.0, r, P25), barenblatt(1.0, r, P25))

    def test_time_corrected_branch_factor(self):
        gamma = derive_constants(P23).gamma
        r = np.linspace(0.0, 5.0, 50)
        w = subsolution(1.0, 2.0 * gamma, r, P23)
        assert np.allclose(w, 0.5 * barenblatt(1.0, r, P23), rtol=1e-14)

    def test_time_corrected_branch_needs_late_s(self):
        gamma = derive_constants(P23).gamma
        with pytest.raises(ParameterError):
            subsolution(1.0, 0.5 * gamma, 1.0, P23)

    def test_large_s_limits(self):
        r = np.linspace(0.0, 5.0, 20)
        for params in (P25, P23):
            sigma = barenblatt(1.0, r, params)
            w = subsolution(1.0, 1e12, r, params)
            z = supersolution(1.0, 1e12, r, params)
            assert np.allclose(w, sigma, rtol=1e-11)
            assert np.allclose(z, sigma, rtol=1e-11)

    def test_supersolution_reference_values(self):
        # A = 1, r = 0, s = 1: sigma * (1 + 1) = 2
        assert supersolution(1.0, 1.0, 0.0, P25) == pytest.approx(2.0, rel=1e-14)
        # A = 1, r = sqrt(2), s = 2 with delta = 0.875
        expect = 0.25 * (1.0 + 2.0**0.875 / 2.0)
        assert supersolution(1.0, 2.0, math.sqrt(2.0), P25) == pytest.approx(expect, rel=1e-14)

    def test_ordering_sub_profile_super(self):
        r = np.linspace(0.0, 30.0, 300)
        for params, s in ((P25, 7.0), (P23, 50.0)):
            for A in (0.2, 1.0, 4.0):
                sigma = barenblatt(A, r, params)
                assert np.all(subsolution(A, s, r, params) <= sigma)
                assert np.all(sigma <= supersolution(A, s, r, params))

    def test_noncritical_rejected(self):
        p = Params(N=2, m=0.5, q=2.0)
        with pytest.raises(ParameterError):
            subsolution(1.0, 5.0, 1.0, p)
        with pytest.raises(ParameterError):
            supersolution(1.0, 5.0, 1.0, p)


class TestLowerBoundAmplitude:
    def test_plugin_formula_when_extra_term_vanishes(self):
        # q = 1.5, m = 0.5: (3 - m - 2q)_+ = 0
        for t, uc in ((0.5, 0.3), (2.0, 0.1)):
            expect = (uc**-0.25 + math.sqrt(0.5) / math.sqrt(t)) ** -4.0
            assert lower_bound_amplitude(t, uc, 1.0, P25) == pytest.approx(expect, rel=1e-14)

    def test_monotone_in_center_and_time(self):
        vals_t = [lower_bound_amplitude(t, 0.5, 1.0, P25) for t in (0.1, 1.0, 10.0)]
        assert vals_t[0] < vals_t[1] < vals_t[2]
        vals_u = [lower_bound_amplitude(1.0, uc, 1.0, P25) for uc in (0.1, 0.5, 0.9)]
        assert vals_u[0] < vals_u[1] < vals_u[2]

    def test_extra_term_active_for_small_q(self):
        p = Params(N=2, m=0.5, q=1.01)
        assert 3.0 - p.m - 2.0 * p.q == pytest.approx(0.48)
        with_sup = lower_bound_amplitude(1.0, 0.5, 2.0, p)
        with_smaller_sup = lower_bound_amplitude(1.0, 0.5, 1.0, p)
        assert with_sup != with_smaller_sup  # sup_u0 enters only through the extra term


class TestFlatDecayBound:
    def test_reference_value(self):
        assert flat_decay_bound(2.0, 1.0, P25) == pytest.approx(0.25, rel=1e-14)

    def test_continuous_extension_at_zero(self):
        assert flat_decay_bound(0.0, 0.7, P25) == pytest.approx(0.7, rel=1e-14)

    def test_decreasing_and_dominated_by_initial_sup(self):
        t = np.linspace(0.0, 50.0, 400)
        vals = flat_decay_bound(t, 0.9, P25)
        assert np.all(np.diff(vals) < 0.0)
        assert np.all(vals <= 0.9)

    def test_solves_decay_ode(self):
        # centered finite difference of the bound matches -u^q to O(dt^2)
        q = P25.q
        for dt in (1e-3, 5e-4):
            t = np.array([1.0 - dt, 1.0, 1.0 + dt])
            u = flat_decay_bound(t, 1.0, P25)
            deriv = (u[2] - u[0]) / (2.0 * dt)
            assert deriv == pytest.approx(-u[1] ** q, abs=4.0 * dt**2)


class TestAStar:
    def test_reference_closed_form(self):
        # integrals (1+r)^-3 and (1+r)^-2 have elementary antiderivatives:
        # 1/2 and 1, so the amplitude is (2*(1/2)/(2*1))^(1/2) = 2^(-1/2)
        assert compute_a_star(P25, 1e-10) == pytest.approx(2.0**-0.5, abs=1e-8)

    def test_one_dimensional_trapezoid_oracle(self):
        # frozen from a 2e7-node trapezoid evaluation with the sqrt
        # substitution removing the r^(-1/2) endpoint singularity
        assert compute_a_star(P15, 1e-10) == pytest.approx(1.015047440682537, abs=1e-7)

    def test_mapping_invariance(self):
        for params in (P25, P15, P23, Params(N=3, m=0.4, critical=True)):
            tol = 1e-9
            a1 = compute_a_star(params, tol, map_kind="algebraic")
            a2 = compute_a_star(params, tol, map_kind="tangent")
            assert abs(a1 - a2) <= 2.0 * tol

    def test_tolerance_halving_stability(self):
        prev_tol = 1e-6
        prev = compute_a_star(P25, prev_tol)
        for _ in range(3):
            tol = prev_tol / 2.0
            val = compute_a_star(P25, tol)
            assert abs(val - prev) < prev_tol
            prev, prev_tol = val, tol

    def test_beta_function_sweep(self):
        # closed-form oracle: integral_0^inf (1+r)^p r^e dr = B(e+1, -p-e-1)
        from scipy.special import betaln

        rng = np.random.default_rng(7)
        for _ in range(20):
            N = int(rng.integers(1, 6))
            m = float(rng.uniform(max(N - 2, 0) / N + 0.05, 0.95))
            params = Params(N=N, m=m, critical=True)
            e = (N - 2.0) / 2.0
            p_num = params.q_star / (m - 1.0)
            p_den = 1.0 / (m - 1.0)
            i_num = math.exp(betaln(e + 1.0, -p_num - e - 1.0))
            i_den = math.exp(betaln(e + 1.0, -p_den - e - 1.0))
            expo = N * (1.0 - m) / (2.0 * (N * m + 2.0 - N))
            expect = (2.0 * i_num / (N * i_den)) ** expo
            assert compute_a_star(params, 1e-10) == pytest.approx(expect, rel=1e-7)

    def test_noncritical_rejected(self):
        with pytest.raises(ParameterError):
            compute_a_star(Params(N=2, m=0.5, q=2.0), 1e-8)


class TestPositivityTransform:
    def test_at_time_zero(self):
        lam, s = positivity_transform(0.0, 1.0, P25)
        assert lam == 1.0 and s == 0.0

    def test_hand_evaluated_point(self):
        # a = 1, m = 0.5, t = ln 4: lam = 1/4, s = (2 - 1)/0.5 = 2
        lam, s = positivity_transform(math.log(4.0), 1.0, P25)
        assert lam == pytest.approx(0.25, rel=1e-14)
        assert s == pytest.approx(2.0, rel=1e-14)

    @pytest.mark.parametrize("sup_u0,params", [(1.0, P25), (3.0, P23), (0.2, P15)])
    def test_initial_slope_is_one(self, sup_u0, params):
        dt = 1e-7
        _, s = positivity_transform(dt, sup_u0, params)
        assert s / dt == pytest.approx(1.0, abs=1e-5)

    def test_monotone(self):
        t = np.linspace(0.0, 5.0, 100)
        lam, s = positivity_transform(t, 2.0, P25)
        assert np.all(np.diff(lam) < 0.0)
        assert np.all(np.diff(s) > 0.0)


class TestProfileSpec:
    def test_dispatch(self):
        r = np.linspace(0.0, 3.0, 10)
        assert np.array_equal(
            ProfileSpec("barenblatt", 1.0).evaluate(r, P25), barenblatt(1.0, r, P25)
        )
        assert np.array_equal(
            ProfileSpec("supersolution", 1.0, s=4.0).evaluate(r, P25),
            supersolution(1.0, 4.0, r, P25),
        )

    def test_validation(self):
        with pytest.raises(ParameterError):
            ProfileSpec("nope", 1.0)
        with pytest.raises(ParameterError):
            ProfileSpec("barenblatt", -1.0)
        with pytest.raises(ParameterError):
            ProfileSpec("subsolution", 1.0)  # missing s
