"""Check mechanics on analytic fields and small solver runs."""

import math

import numpy as np
import pytest

from fdalab.oracles import fde_barenblatt_exact, flat_ode_exact
from fdalab.profiles import (
    Params,
    barenblatt,
    derive_constants,
    flat_decay_bound,
    positivity_transform,
    subsolution,
)
from fdalab.rescale import RescaledProfile, to_selfsimilar
from fdalab.solver import (
    BarenblattIC,
    Field,
    IndicatorIC,
    SolverConfig,
    TableIC,
    build_grid,
    init_field,
    make_snapshot,
    solve,
)
from fdalab.verifier import (
    CheckAborted,
    boundary_influence,
    check_gradient_estimate,
    check_lower_bound,
    check_positivity_transform,
    check_quadratic_envelope,
    check_residual_sign,
    check_sandwich,
    check_upper_bound,
    convergence_metric,
    discretization_tolerance,
    estimate_amplitude,
    fit_tail_exponent,
    search_sandwich,
)

P25 = Params(N=2, m=0.5, critical=True)
P23 = Params(N=2, m=0.3, critical=True)


def _flat_series(times, u0=1.0, n=32, r_max=8.0):
    grid = build_grid(2, r_max, n)
    return [
        make_snapshot(t, Field(grid, np.full(n, float(flat_ode_exact(t, u0, P25)))))
        for t in times
    ]


def _oracle_series(times, C=1.0, n=400, r_max=60.0):
    grid = build_grid(2, r_max, n)
    return [
        make_snapshot(t, Field(grid, fde_barenblatt_exact(t, grid.centers, C, P25)))
        for t in times
    ]


class TestGradientEstimate:
    def test_flat_solution_has_positive_margin(self):
        rep = check_gradient_estimate(_flat_series([0.5, 1.0, 4.0]), 1.0, P25, tol=1e-12)
        assert rep.passed
        c = derive_constants(P25)
        assert rep.worst_margin == pytest.approx(math.sqrt(c.b0 / 4.0), rel=1e-12)

    def test_oracle_saturates_bound_at_large_radius(self):
        # the absorption-free profile's slope approaches sqrt(b0/t) exactly
        snaps = _oracle_series([1.0], n=4000, r_max=400.0)
        rep = check_gradient_estimate(snaps, 10.0, P25, tol=1e-6)
        assert rep.passed
        bound = math.sqrt(derive_constants(P25).b0 / 1.0)
        grad_max = bound - rep.worst_margin
        assert grad_max == pytest.approx(bound, rel=1e-2)  # equality type
        assert rep.worst_margin >= 0.0

    def test_aborts_on_zero_cells(self):
        grid = build_grid(2, 8.0, 32)
        dead = make_snapshot(1.0, Field(grid, np.zeros(32)))
        with pytest.raises(CheckAborted):
            check_gradient_estimate([dead], 1.0, P25, tol=1e-6)

    def test_solver_run_passes(self):
        grid = build_grid(2, 16.0, 400)
        cfg = SolverConfig(params=P25, bc="zero_flux", dt_init=1e-4, dt_max=5e-3)
        snaps = solve(cfg, grid, IndicatorIC(1.0, 1.0), [0.1, 0.5, 1.0])
        rep = check_gradient_estimate(snaps, 1.0, P25, tol=5e-2)
        assert rep.passed, rep


class TestUpperBound:
    def test_flat_margin_vanishes(self):
        rep = check_upper_bound(_flat_series([0.5, 1.0, 4.0]), 1.0, P25, tol=1e-12)
        assert rep.passed
        assert abs(rep.worst_margin) < 1e-13

    def test_short_time_limit(self):
        rep = check_upper_bound(_flat_series([1e-9]), 1.0, P25, tol=1e-12)
        assert rep.passed

    def test_compactly_supported_run(self):
        grid = build_grid(2, 10.0, 200)
        cfg = SolverConfig(params=P25, bc="zero_flux", dt_max=5e-3)
        snaps = solve(cfg, grid, IndicatorIC(1.0, 1.0), [0.25, 1.0])
        rep = check_upper_bound(snaps, 1.0, P25, tol=1e-8)
        assert rep.passed, rep


class TestLowerBound:
    def test_flat_solution_clears_decaying_bound(self):
        rep = check_lower_bound(_flat_series([0.5, 1.0]), 1.0, P25, tol=1e-9)
        assert rep.passed
        assert rep.worst_margin > 0.0

    def test_profile_data_tail_matches_bound_power(self):
        grid = build_grid(2, 30.0, 600)
        cfg = SolverConfig(params=P25, bc="zero_flux", dt_init=1e-4, dt_max=2e-3)
        snaps = solve(cfg, grid, BarenblattIC(A=1.0), [0.5, 1.0])
        rep = check_lower_bound(snaps, 1.0, P25, tol=0.05)
        assert rep.passed, rep

    def test_indicator_run_passes(self):
        grid = build_grid(2, 20.0, 400)
        cfg = SolverConfig(params=P25, bc="zero_flux", dt_init=1e-4, dt_max=2e-3)
        snaps = solve(cfg, grid, IndicatorIC(1.0, 1.0), [0.5, 1.0])
        rep = check_lower_bound(snaps, 1.0, P25, tol=1e-3)
        assert rep.passed, rep


class TestTailExponent:
    def test_exact_profile_tail(self):
        grid = build_grid(2, 120.0, 2400)
        snap = make_snapshot(1.0, init_field(grid, BarenblattIC(A=1.0), P25))
        fitted = fit_tail_exponent(snap, (10.0, 100.0))
        assert fitted == pytest.approx(2.0 / (1.0 - P25.m), rel=0.02)

    def test_flat_field_has_no_tail(self):
        snap = _flat_series([1.0], n=256, r_max=150.0)[0]
        assert abs(fit_tail_exponent(snap, (10.0, 100.0))) < 1e-10

    def test_window_outside_grid(self):
        snap = _flat_series([1.0])[0]
        with pytest.raises(ValueError):
            fit_tail_exponent(snap, (1.0, 100.0))


class TestQuadraticEnvelope:
    def test_exact_profile_immediate_witness(self):
        # u = sigma_A: u^(m-1) = A + b0 r^2, so eps >= b0 gives kappa = A
        grid = build_grid(2, 12.0, 128)
        snap = make_snapshot(1.0, init_field(grid, BarenblattIC(A=4.0), P25))
        tau, kappa, rep = check_quadratic_envelope([snap], eps=0.5, params=P25)
        assert rep.passed
        assert tau == 1.0
        assert kappa == pytest.approx(4.0, abs=1e-12)

    def test_flat_field_constant_envelope(self):
        snap = _flat_series([2.0], u0=0.5)[0]
        u_val = float(flat_ode_exact(2.0, 0.5, P25))
        tau, kappa, rep = check_quadratic_envelope([snap], eps=0.9, params=P25)
        assert rep.passed
        # the first cell center sits at h/2, not 0, so the envelope shifts by eps r1^2
        r1 = float(snap.field.grid.centers[0])
        assert kappa == pytest.approx(u_val ** (P25.m - 1.0) - 0.9 * r1**2, rel=1e-12)

    def test_small_eps_on_static_profile_fails(self):
        # eps < b0 needs the time decay; a static profile never qualifies
        grid = build_grid(2, 12.0, 128)
        snap = make_snapshot(1.0, init_field(grid, BarenblattIC(A=4.0), P25))
        tau, kappa, rep = check_quadratic_envelope([snap], eps=0.25, params=P25)
        assert not rep.passed
        assert math.isnan(tau) and math.isnan(kappa)
        assert "longer schedule" in rep.notes


class TestResidualSign:
    def test_stationary_branch_threshold(self):
        # closed form at these exponents: admissible iff A >= q - 1 = 1/2
        A_grid = np.round(np.arange(0.3, 1.01, 0.025), 10)
        adm, rep = check_residual_sign(
            "sub", A_grid, [5.0, 20.0, 100.0], y_max=8.0, params=P25, tol=5e-4, n_y=600
        )
        assert rep.passed
        assert adm.min() == pytest.approx(0.5, abs=0.026)
        # admissible set is upward closed
        assert np.array_equal(adm, A_grid[A_grid >= adm.min()])

    def test_super_set_downward_closed(self):
        A_grid = np.round(np.arange(0.02, 0.61, 0.02), 10)
        adm, rep = check_residual_sign(
            "super", A_grid, [25.0, 100.0, 500.0], y_max=8.0, params=P25, tol=1e-4
        )
        assert rep.passed
        assert adm.size > 0 and adm.max() < 0.6
        assert np.array_equal(adm, A_grid[A_grid <= adm.max()])

    def test_empty_set_reported(self):
        adm, rep = check_residual_sign(
            "sub", [0.05, 0.1], [5.0, 20.0], y_max=8.0, params=P25, tol=1e-6
        )
        assert adm.size == 0
        assert not rep.passed

    def test_branch_two_rejects_early_times(self):
        c = derive_constants(P23)
        with pytest.raises(ValueError):
            check_residual_sign("sub", [10.0], [c.s0 / 2.0], y_max=6.0, params=P23, tol=1e-4)

    def test_branch_two_admits_large_amplitudes(self):
        c = derive_constants(P23)
        adm, rep = check_residual_sign(
            "sub", [5.0, 40.0, 100.0], [c.s0, 3.0 * c.s0], y_max=6.0, params=P23, tol=1e-4
        )
        assert rep.passed
        assert adm.size > 0

    def test_kind_validated(self):
        with pytest.raises(ValueError):
            check_residual_sign("both", [1.0], [5.0], 6.0, P25, 1e-4)


def _profile_series(A, s_values, n=200, y_max=10.0):
    y = np.linspace(0.0, y_max, n)
    return [
        RescaledProfile(s=s, T=math.e, y=y, values=barenblatt(A, y, P25)) for s in s_values
    ]


class TestSandwich:
    def test_profile_band_passes(self):
        # stationary profile with A strictly between the barrier amplitudes
        series = _profile_series(0.3, [25.0, 30.0, 40.0])
        rep = check_sandwich(series, A1=0.5, A2=0.1, gamma_T=1.0, params=P25, tol=1e-9)
        assert rep.passed, rep

    def test_zero_orbit_fails_lower_barrier(self):
        y = np.linspace(0.0, 10.0, 100)
        series = [
            RescaledProfile(s=s, T=math.e, y=y, values=np.zeros(100)) for s in (25.0, 30.0, 40.0)
        ]
        rep = check_sandwich(series, A1=0.5, A2=0.1, gamma_T=1.0, params=P25, tol=1e-6)
        assert not rep.passed

    def test_short_series_rejected(self):
        with pytest.raises(ValueError):
            check_sandwich(_profile_series(0.3, [25.0]), 0.5, 0.1, 1.0, P25, 1e-6)

    def test_search_finds_witnesses(self):
        series = _profile_series(0.3, [25.0, 30.0, 40.0])
        A1, A2, gamma, rep = search_sandwich(
            series, P25, 1e-9, A1_candidates=[0.4, 0.5, 1.0], A2_candidates=[0.05, 0.1],
            gamma_candidates=[0.5, 1.0],
        )
        assert rep.passed
        assert A1 >= 0.4 and A2 <= 0.1


class TestAmplitudeAndMetric:
    def test_inverts_stationary_profile_exactly(self):
        y = np.linspace(0.0, 10.0, 100)  # first node at the origin
        for A in (0.3, 1.0, 2.7):
            prof = RescaledProfile(s=5.0, T=1.0, y=y, values=barenblatt(A, y, P25))
            assert estimate_amplitude(prof, P25) == pytest.approx(A, rel=1e-14)

    def test_time_corrected_profile_overshoots(self):
        y = np.linspace(0.0, 10.0, 100)
        s = 3.0
        prof = RescaledProfile(s=s, T=1.0, y=y, values=subsolution(30.0, s, y, P23))
        expect = 30.0 * (1.0 - derive_constants(P23).gamma / s) ** (P23.m - 1.0)
        assert estimate_amplitude(prof, P23) == pytest.approx(expect, rel=1e-12)
        assert estimate_amplitude(prof, P23) > 30.0

    def test_doubling_scales_by_power(self):
        y = np.linspace(0.0, 10.0, 100)
        base = barenblatt(1.0, y, P25)
        p1 = RescaledProfile(s=5.0, T=1.0, y=y, values=base)
        p2 = RescaledProfile(s=5.0, T=1.0, y=y, values=2.0 * base)
        ratio = estimate_amplitude(p2, P25) / estimate_amplitude(p1, P25)
        assert ratio == pytest.approx(2.0 ** (P25.m - 1.0), rel=1e-13)

    def test_zero_center_rejected(self):
        prof = RescaledProfile(s=1.0, T=1.0, y=np.linspace(0, 1, 5), values=np.zeros(5))
        with pytest.raises(ValueError):
            estimate_amplitude(prof, P25)

    def test_metric_zero_at_target(self):
        a_star = 2.0**-0.5
        y = np.linspace(0.0, 10.0, 200)
        prof = RescaledProfile(s=5.0, T=1.0, y=y, values=barenblatt(a_star, y, P25))
        assert convergence_metric(prof, a_star, P25) == 0.0

    def test_metric_dominated_by_origin_for_doubled_amplitude(self):
        a_star = 2.0**-0.5
        y = np.linspace(0.0, 10.0, 200)
        prof = RescaledProfile(s=5.0, T=1.0, y=y, values=barenblatt(2 * a_star, y, P25))
        expect = abs(a_star ** (1 / (P25.m - 1)) - (2 * a_star) ** (1 / (P25.m - 1)))
        assert convergence_metric(prof, a_star, P25) == pytest.approx(expect, rel=1e-12)

    def test_metric_minimized_at_target_amplitude(self):
        a_star = 2.0**-0.5
        y = np.linspace(0.0, 10.0, 200)
        candidates = [0.4, 0.6, a_star, 0.9, 1.2]
        vals = [
            convergence_metric(
                RescaledProfile(s=5.0, T=1.0, y=y, values=barenblatt(a, y, P25)), a_star, P25
            )
            for a in candidates
        ]
        assert int(np.argmin(vals)) == candidates.index(a_star)


class TestPositivityTransform:
    def test_time_zero_equality(self):
        grid = build_grid(2, 8.0, 64)
        f = init_field(grid, IndicatorIC(1.0, 1.0), P25)
        snap = make_snapshot(0.0, f)
        rep = check_positivity_transform([snap], [snap], 1.0, P25, tol=1e-12)
        assert rep.passed
        assert rep.worst_margin == 0.0

    def test_flat_closed_forms(self):
        # absorbing flat solution vs exp(-a t) x (flat absorption-free = u0)
        times = [0.25, 1.0, 3.0]
        u_snaps = _flat_series(times, u0=1.0)
        grid = u_snaps[0].field.grid
        fde_snaps = []
        for t in times:
            _, s = positivity_transform(t, 1.0, P25)
            fde_snaps.append(make_snapshot(s, Field(grid, np.ones(grid.n_cells))))
        rep = check_positivity_transform(u_snaps, fde_snaps, 1.0, P25, tol=1e-12)
        assert rep.passed
        for t in times:
            bound = float(flat_decay_bound(t, 1.0, P25))
            assert bound >= math.exp(-t) - 1e-13

    def test_schedule_mismatch_rejected(self):
        u = _flat_series([1.0])
        f = _flat_series([0.9])
        with pytest.raises(ValueError):
            check_positivity_transform(u, f, 1.0, P25, tol=1e-6)
        with pytest.raises(ValueError):
            check_positivity_transform(u, u + u, 1.0, P25, tol=1e-6)


class TestHelpers:
    def test_discretization_tolerance(self):
        assert discretization_tolerance(1.0, 1.1) == pytest.approx(0.5)
        assert discretization_tolerance(1.0, 1.1, factor=3.0) == pytest.approx(0.3)

    def test_report_line_format(self):
        rep = check_upper_bound(_flat_series([1.0]), 1.0, P25, tol=1e-6)
        name, margin, tol, status = rep.line().split()
        assert name == "upper_bound"
        float(margin)
        assert float(tol) == 1e-6
        assert status == "pass"

    def test_boundary_influence_flags_tight_domain(self):
        cfg = SolverConfig(params=P25, bc="dirichlet_zero", dt_max=5e-3)
        tight = build_grid(2, 3.0, 60)
        wide = build_grid(2, 12.0, 240)
        dev_tight = boundary_influence(cfg, tight, IndicatorIC(1.0, 1.0), [1.0])
        dev_wide = boundary_influence(cfg, wide, IndicatorIC(1.0, 1.0), [1.0])
        assert dev_tight > 10.0 * dev_wide
        assert dev_tight > 1e-3
