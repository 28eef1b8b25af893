"""Solver tests: closed-form oracles, single-level scheme, refinement ladder."""

import math

import numpy as np
import pytest

import oblique_skorohod as ok

from conftest import (DT, GRID_N, Bundle, grid_times, halfline_set,
                      make_bundles, ramp_path, sinusoid_path, solve_bundle)


def zero_path(n: int = GRID_N, dt: float = DT, dim: int = 1) -> ok.SampledPath:
    return ok.SampledPath(t0=0.0, dt=dt, values=np.zeros((n + 1, dim)),
                          extension="zero")


def halfline_phi() -> ok.ConvexFunction:
    return ok.indicator(halfline_set(), r0=0.5, h0=0.5)


class TestOracleHalfline:
    def test_downward_ramp(self):
        # psi = -t stays pinned at the boundary: x = 0, k = -t/2 for h = 2
        sol = ok.oracle_halfline(2.0, 0.0, ramp_path(-1.0))
        assert np.all(sol.x.values == 0.0)
        np.testing.assert_allclose(sol.k.values[:, 0], -grid_times() / 2.0,
                                   atol=1e-15)
        assert abs(sol.tv_k - 0.5) < 1e-12
        assert sol.diagnostics["complementarity_max"] == 0.0
        assert sol.diagnostics["max_feasibility_defect"] == 0.0

    def test_upward_ramp_free(self):
        sol = ok.oracle_halfline(2.0, 0.0, ramp_path(1.0))
        np.testing.assert_array_equal(sol.x.values[:, 0], grid_times())
        assert np.all(sol.k.values == 0.0)
        assert sol.tv_k == 0.0

    def test_zigzag_exact(self):
        m = ok.SampledPath(t0=0.0, dt=1.0,
                           values=np.array([[0.0], [-1.0], [0.0]]),
                           extension="zero")
        sol = ok.oracle_halfline(1.0, 0.0, m)
        np.testing.assert_array_equal(sol.x.values[:, 0], [0.0, 0.0, 1.0])
        np.testing.assert_array_equal(sol.k.values[:, 0], [0.0, -1.0, -1.0])
        assert sol.tv_k == 1.0

    def test_positive_start_delays_contact(self):
        # x0 = 0.3: free until psi dips below 0 at t = 0.3, reflected after
        sol = ok.oracle_halfline(1.0, 0.3, ramp_path(-1.0))
        t = grid_times()
        np.testing.assert_allclose(sol.x.values[:, 0],
                                   np.maximum(0.3 - t, 0.0), atol=1e-15)
        assert abs(sol.tv_k - 0.7) < 1e-12

    def test_complementarity_small_on_oscillation(self):
        sol = ok.oracle_halfline(1.5, 0.0, sinusoid_path([-1.0], 0.9))
        # growth of k concentrates where x sits at the boundary, so the
        # discrete product is at most one increment wide
        assert sol.diagnostics["complementarity_max"] < 1e-5
        assert sol.x.values.min() >= -1e-12

    def test_rejects_bad_arguments(self):
        m = ramp_path(-1.0)
        with pytest.raises(ValueError):
            ok.oracle_halfline(1.0, -0.1, m)
        with pytest.raises(ValueError):
            ok.oracle_halfline(0.0, 0.0, m)
        with pytest.raises(ValueError):
            ok.oracle_halfline(1.0, 0.0, ramp_path(-1.0, 1.0))
        shifted = ok.SampledPath(t0=0.5, dt=DT, values=m.values,
                                 extension="zero")
        with pytest.raises(ok.GridMismatch):
            ok.oracle_halfline(1.0, 0.0, shifted)


class TestPenalizedLevel:
    def test_upward_ramp_sees_delayed_smoothed_input(self):
        # input t averaged over a trailing eps window and read eps late:
        # the state ends at T - 3 eps / 2 and never needs the constraint
        eps = 0.02
        m = ok.mollify(ramp_path(1.0), eps)
        sol = ok.solve_penalized(halfline_phi(),
                                 ok.constant_field([[2.0]], c=2.0),
                                 ok.zero_drift(1), m, [0.0],
                                 ok.PenalizedConfig(eps=eps))
        assert abs(sol.x.values[-1, 0] - (1.0 - 1.5 * eps)) < 1e-12
        assert sol.tv_k == 0.0
        assert sol.diagnostics["max_feasibility_defect"] == 0.0

    def test_constant_drift_is_delayed_too(self):
        eps = 0.1
        sol = ok.solve_penalized(halfline_phi(),
                                 ok.constant_field([[1.0]], c=2.0),
                                 ok.constant_drift([-1.0]), zero_path(),
                                 [1.0], ok.PenalizedConfig(eps=eps))
        # drift is zero-extended before time 0, so only T - eps of it acts
        assert abs(sol.x.values[-1, 0] - eps) < 1e-10
        assert np.all(sol.k.values == 0.0)

    def test_discrete_identity_replay(self):
        # replay the update rule from the published quadrature arrays
        eps = 0.01
        phi = halfline_phi()
        hf = ok.constant_field([[2.0]], c=2.0)
        m = ok.mollify(ramp_path(-1.0), eps)
        sol = ok.solve_penalized(phi, hf, ok.zero_drift(1), m, [0.0],
                                 ok.PenalizedConfig(eps=eps))
        prox = ok.make_resolvent(phi, eps)
        feval = ok.make_field_eval(hf)
        mderiv = np.diff(m.values, axis=0) / m.dt
        n_sub = sol.diagnostics["n_substeps_per_cell"]
        h = sol.diagnostics["substep"]
        worst_x = worst_k = 0.0
        for q in range(sol.x_quad.shape[0] - 1):
            x = sol.x_quad[q]
            g = (x - prox(x)) / eps
            tau = q * h - eps
            u = np.zeros(1)
            if tau >= -1e-12:
                cell = min(int(tau / m.dt + 1e-9), m.n_cells - 1)
                u = mderiv[cell]
            rx = sol.x_quad[q + 1] - x - h * (u - feval(x) @ g)
            rk = sol.k_quad[q + 1] - sol.k_quad[q] - h * g
            worst_x = max(worst_x, float(np.abs(rx).max()))
            worst_k = max(worst_k, float(np.abs(rk).max()))
        assert worst_x < 1e-13
        assert worst_k < 1e-12
        assert n_sub == 2

    def test_discrete_identity_with_drift_and_history(self):
        # drift reads the projected state one lag back, frozen at x0 early
        b = [b for b in make_bundles() if b.name == "ball-affine"][0]
        eps = 0.02
        m = ok.mollify(b.m, eps)
        sol = ok.solve_penalized(b.phi, b.hf, b.f, m, b.x0,
                                 ok.PenalizedConfig(eps=eps))
        prox = ok.make_resolvent(b.phi, eps)
        feval = ok.make_field_eval(b.hf)
        mderiv = np.diff(m.values, axis=0) / m.dt
        h = sol.diagnostics["substep"]
        n_sub = sol.diagnostics["n_substeps_per_cell"]
        lag_sub = int(round(eps / m.dt)) * n_sub
        worst = 0.0
        for q in range(sol.x_quad.shape[0] - 1):
            x = sol.x_quad[q]
            g = (x - prox(x)) / eps
            tau = q * h - eps
            if tau >= -1e-12:
                cell = min(int(tau / m.dt + 1e-9), m.n_cells - 1)
                xd = sol.x_quad[q - lag_sub] if q >= lag_sub else sol.x_quad[0]
                u = mderiv[cell] + b.f.eval(tau, ok.project_set(b.phi.domain, xd))
                step = h * (u - feval(x) @ g)
            else:
                step = -h * (feval(x) @ g)
            worst = max(worst, float(np.abs(sol.x_quad[q + 1] - x - step).max()))
        assert worst < 1e-13

    def test_quadrature_arrays_match_grid_slices(self):
        eps = 0.01
        m = ok.mollify(ramp_path(-1.0), eps)
        sol = ok.solve_penalized(halfline_phi(),
                                 ok.constant_field([[2.0]], c=2.0),
                                 ok.zero_drift(1), m, [0.0],
                                 ok.PenalizedConfig(eps=eps))
        n_sub = sol.diagnostics["n_substeps_per_cell"]
        np.testing.assert_array_equal(sol.x_quad[::n_sub], sol.x.values)
        np.testing.assert_array_equal(sol.k_quad[::n_sub], sol.k.values)
        assert np.all(sol.k_quad[0] == 0.0)
        dtq = np.diff(sol.t_quad)
        assert abs(dtq.max() - dtq.min()) < 1e-15
        assert abs(dtq[0] - sol.diagnostics["substep"]) < 1e-15

    def test_feasibility_defect_within_eps_gradient_bound(self):
        for eps in (0.05, 0.01):
            m = ok.mollify(ramp_path(-1.0), eps)
            sol = ok.solve_penalized(halfline_phi(),
                                     ok.constant_field([[2.0]], c=2.0),
                                     ok.zero_drift(1), m, [0.0],
                                     ok.PenalizedConfig(eps=eps))
            d = sol.diagnostics
            assert d["feasibility_bound"] == eps * d["max_gradient_norm"]
            assert d["max_feasibility_defect"] <= d["feasibility_bound"] + 1e-12

    def test_eps_off_grid_rejected(self):
        m = ramp_path(-1.0)
        for eps in (0.0015, 5e-4):
            with pytest.raises(ok.GridMismatch):
                ok.solve_penalized(halfline_phi(),
                                   ok.constant_field([[2.0]], c=2.0),
                                   ok.zero_drift(1), m, [0.0],
                                   ok.PenalizedConfig(eps=eps))

    def test_guard_ball_breach(self):
        cfg = ok.PenalizedConfig(eps=0.01, guard_radius=0.3)
        with pytest.raises(ok.StabilityBreach, match="guard"):
            ok.solve_penalized(halfline_phi(),
                               ok.constant_field([[2.0]], c=2.0),
                               ok.zero_drift(1), ramp_path(-1.0), [0.5], cfg)

    def test_dimension_mismatch_rejected(self):
        with pytest.raises(ValueError):
            ok.solve_penalized(halfline_phi(),
                               ok.constant_field([[2.0]], c=2.0),
                               ok.zero_drift(1), ramp_path(-1.0),
                               [0.0, 0.0], ok.PenalizedConfig(eps=0.01))

    def test_config_validation(self):
        with pytest.raises(ValueError):
            ok.PenalizedConfig(eps=0.0)
        with pytest.raises(ValueError):
            ok.PenalizedConfig(eps=0.01, substep_ratio=1)
        with pytest.raises(ValueError):
            ok.PenalizedConfig(eps=0.01, guard_radius=0.0)


class TestRefinement:
    def test_halfline_matches_oracle(self):
        b = [b for b in make_bundles() if b.name == "halfline"][0]
        sol = solve_bundle(b)
        ref = ok.oracle_halfline(2.0, 0.0, b.m)
        gap = np.abs(sol.x.values - ref.x.values).max()
        assert gap < 1e-2
        assert abs(sol.tv_k - 0.5) < 2e-2
        assert np.abs(sol.k.values - ref.k.values).max() < 1e-2

    def test_box_problem_decouples_per_coordinate(self):
        # diagonal field + box constraint: the 2D sweep is two independent 1D ones
        b = [b for b in make_bundles() if b.name == "box-diag"][0]
        eps = 0.02
        m2 = ok.mollify(b.m, eps)
        sol2 = ok.solve_penalized(b.phi, b.hf, b.f, m2, b.x0,
                                  ok.PenalizedConfig(eps=eps))
        for j, hval in enumerate([2.0, 0.5]):
            phi1 = ok.indicator(ok.box([0.0], [1.0]), r0=0.1)
            m1 = ok.SampledPath(t0=0.0, dt=DT, values=m2.values[:, j:j + 1],
                                extension="zero")
            sol1 = ok.solve_penalized(phi1, ok.constant_field([[hval]], c=2.0),
                                      ok.zero_drift(1), m1, [0.5],
                                      ok.PenalizedConfig(eps=eps))
            np.testing.assert_array_equal(sol2.x.values[:, j],
                                          sol1.x.values[:, 0])
            np.testing.assert_array_equal(sol2.k.values[:, j],
                                          sol1.k.values[:, 0])

    def test_quadratic_part_drives_decay(self):
        # phi = x^2/2 on the half-line, no input: x' = -1.5 x in the limit
        phi = ok.quadratic_plus_indicator([[1.0]], [0.0], halfline_set(),
                                          r0=0.5, h0=0.5, lipschitz_L=5.0)
        sol = ok.solve_skorohod(phi, ok.constant_field([[1.5]], c=2.0),
                                ok.zero_drift(1), zero_path(), [0.5],
                                tol=1e-3)
        t = grid_times()
        err = np.abs(sol.x.values[:, 0] - 0.5 * np.exp(-1.5 * t)).max()
        assert err < 5e-3
        tv_ref = (0.5 / 1.5) * (1.0 - math.exp(-1.5))
        assert abs(sol.tv_k - tv_ref) < 5e-3
        # pathwise balance x + H k = x0 holds to rounding at every node
        ident = np.abs(sol.x.values[:, 0] + 1.5 * sol.k.values[:, 0] - 0.5)
        assert ident.max() < 1e-10

    def test_stationary_input_converges_immediately(self):
        sol = ok.solve_skorohod(halfline_phi(),
                                ok.constant_field([[2.0]], c=2.0),
                                ok.zero_drift(1), zero_path(), [0.5],
                                tol=1e-6)
        assert sol.refinement_history == [(0.1, None), (0.05, 0.0)]
        assert np.all(sol.x.values == 0.5)
        assert sol.tv_k == 0.0

    def test_tol_zero_runs_the_full_ladder(self):
        b = [b for b in make_bundles() if b.name == "halfline"][0]
        sol = solve_bundle(b, tol=0.0, max_halvings=7)
        eps_seq = [e for e, _ in sol.refinement_history]
        assert eps_seq == pytest.approx(
            [0.1, 0.05, 0.025, 0.013, 0.007, 0.004, 0.002, 0.001],
            abs=1e-12)
        assert len(sol.diagnostics["tv_k_levels"]) == 8
        assert "tv_k_ratio_last_two" in sol.diagnostics
        gaps = [g for _, g in sol.refinement_history[1:]]
        assert all(g > 0.0 for g in gaps)

    def test_ladder_stops_at_the_grid_floor(self):
        m = ramp_path(-1.0, dt=0.01, n=100)
        sol = ok.solve_skorohod(halfline_phi(),
                                ok.constant_field([[2.0]], c=2.0),
                                ok.zero_drift(1), m, [0.0], tol=0.0,
                                eps0=0.04, max_halvings=50)
        eps_seq = [e for e, _ in sol.refinement_history]
        assert eps_seq == [0.04, 0.02, 0.01]
        assert sol.eps == 0.01

    def test_eps0_snaps_up_to_the_grid(self):
        b = [b for b in make_bundles() if b.name == "halfline"][0]
        sol = ok.solve_skorohod(b.phi, b.hf, b.f, b.m, b.x0, tol=b.tol,
                                eps0=0.0234)
        assert sol.refinement_history[0][0] == 0.024

    def test_no_convergence_carries_history(self):
        b = [b for b in make_bundles() if b.name == "halfline"][0]
        with pytest.raises(ok.NoConvergence) as exc:
            solve_bundle(b, tol=1e-9, max_halvings=3)
        hist = exc.value.history
        assert len(hist) == 4
        assert hist[0][1] is None
        assert all(g > 1e-9 for _, g in hist[1:])

    def test_invalid_arguments(self):
        b = [b for b in make_bundles() if b.name == "halfline"][0]
        with pytest.raises(ValueError):
            solve_bundle(b, tol=-1.0)
        with pytest.raises(ValueError):
            ok.solve_skorohod(b.phi, b.hf, b.f, b.m, b.x0, tol=b.tol,
                              max_halvings=-1)

    def test_refined_catalog_feasibility(self, refined_catalog):
        # converged solutions sit within 10 tol of the constraint set
        for name, (b, sol) in refined_catalog.items():
            worst = max(ok.set_distance(b.phi.domain, x)
                        for x in sol.x.values)
            assert worst <= 10.0 * b.tol, (name, worst)

    def test_refined_catalog_histories_converged(self, refined_catalog):
        for name, (b, sol) in refined_catalog.items():
            eps_f, gap = sol.refinement_history[-1]
            assert gap is not None and gap <= b.tol, name
            assert sol.eps == eps_f


class TestStabilityGap:
    def test_identical_runs_have_zero_gap(self):
        b = [b for b in make_bundles() if b.name == "halfline"][0]
        s1 = solve_bundle(b)
        s2 = solve_bundle(b)
        rep = ok.stability_gap(s1, s2, b.m, b.m)
        assert rep["sup_gap"] == 0.0
        assert rep["tv_gap_m"] == 0.0
        assert rep["V"] > 0.0

    def test_ramp_perturbation_gap_is_controlled(self):
        b = [b for b in make_bundles() if b.name == "halfline"][0]
        delta = 1e-3
        m2 = ramp_path(-1.0 - delta)
        s1 = solve_bundle(b)
        s2 = ok.solve_skorohod(b.phi, b.hf, b.f, m2, b.x0, tol=b.tol)
        rep = ok.stability_gap(s1, s2, b.m, m2)
        assert 0.0 < rep["sup_gap"] < 0.05
        assert abs(rep["tv_gap_m"] - delta) < 1e-12

    def test_grid_mismatch_rejected(self):
        b = [b for b in make_bundles() if b.name == "halfline"][0]
        s1 = solve_bundle(b)
        m_short = ramp_path(-1.0, n=500)
        s2 = ok.solve_skorohod(b.phi, b.hf, b.f, m_short, b.x0, tol=b.tol)
        with pytest.raises(ok.GridMismatch):
            ok.stability_gap(s1, s2, b.m, m_short)
