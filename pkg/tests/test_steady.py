import numpy as np
import pytest

from porophase import (ModelParams, NewtonConfig, StationaryProblem,
                       ThetaSchemeConfig, assemble_jacobian, assemble_residual,
                       build_grid, continuation_in_k2, f1_table, f2_table,
                       interface_crossings, make_initial_guess, max_stable_tau,
                       newton_solve, reaction_f1, reaction_f2, run_evolution,
                       two_minima)
from porophase.steady import NoConvergenceError, fd_jacobian, solution_to_csv


def fig_problem(params, n=300, eps_D=-0.141, m_D=-0.13):
    return StationaryProblem(build_grid(0.0, 1.0, n), params, eps_D=eps_D, m_D=m_D)


def transliterated_residual(problem, u):
    """Scalar reimplementation of the stencil rows."""
    par = problem.params
    s = problem.grid.h
    n = problem.n
    e, m = u[0::2], u[1::2]
    R = np.empty_like(u)
    R[0] = e[0] - problem.eps_D
    R[1] = m[0] - problem.m_D
    for i in range(1, n):
        d2e = (e[i + 1] - 2 * e[i] + e[i - 1]) / s ** 2
        d2m = (m[i + 1] - 2 * m[i] + m[i - 1]) / s ** 2
        R[2 * i] = -par.k1 * d2e - par.k2 * d2m - reaction_f1(e[i], m[i], par)
        R[2 * i + 1] = -par.k2 * d2e - par.k3 * d2m - reaction_f2(e[i], m[i], par)
    if problem.bc_mode == "dirichlet_neumann":
        d2e = (e[n - 1] - 2 * e[n] + e[n - 1]) / s ** 2
        d2m = (m[n - 1] - 2 * m[n] + m[n - 1]) / s ** 2
        R[2 * n] = -par.k1 * d2e - par.k2 * d2m - reaction_f1(e[n], m[n], par)
        R[2 * n + 1] = -par.k2 * d2e - par.k3 * d2m - reaction_f2(e[n], m[n], par)
    else:
        R[2 * n] = e[n] - problem.right_values[0]
        R[2 * n + 1] = m[n] - problem.right_values[1]
    return R


class TestResidual:
    def test_constant_equilibrium_with_matching_bc(self, fig_params):
        poor = two_minima(fig_params)[0]
        prob = fig_problem(fig_params, n=50, eps_D=poor.eps, m_D=poor.m)
        u = np.empty(prob.n_unknowns)
        u[0::2], u[1::2] = poor.eps, poor.m
        assert np.abs(assemble_residual(prob, u)).max() < 1e-12

    def test_matches_transliteration(self, fig_params, rng):
        for bc_mode in ("dirichlet_neumann", "dirichlet_dirichlet"):
            prob = StationaryProblem(
                build_grid(0.0, 1.0, 24), fig_params, eps_D=-0.141, m_D=-0.13,
                bc_mode=bc_mode,
                right_values=(-0.1, -0.05) if bc_mode == "dirichlet_dirichlet" else None)
            u = -0.2 + 0.1 * rng.random(prob.n_unknowns)
            np.testing.assert_allclose(assemble_residual(prob, u),
                                       transliterated_residual(prob, u),
                                       rtol=1e-13, atol=1e-15)

    def test_wrong_size_rejected(self, fig_params):
        prob = fig_problem(fig_params, n=10)
        with pytest.raises(ValueError):
            assemble_residual(prob, np.zeros(7))


class TestJacobian:
    def test_quadratic_energy_gives_state_independent_jacobian(self, rng):
        par = ModelParams(a=0.5, b=1.0, p=0.1, alpha=0.0, k1=1e-3, k2=5e-4, k3=1e-3)
        prob = fig_problem(par, n=16)
        u1 = -0.2 + 0.1 * rng.random(prob.n_unknowns)
        u2 = -0.2 + 0.1 * rng.random(prob.n_unknowns)
        J1 = assemble_jacobian(prob, u1).to_dense()
        J2 = assemble_jacobian(prob, u2).to_dense()
        np.testing.assert_allclose(J1, J2, atol=1e-12)

    def test_against_finite_differences(self, fig_params, rng):
        prob = fig_problem(fig_params, n=14)
        for _ in range(20):
            u = -0.2 + 0.1 * rng.random(prob.n_unknowns)
            J = assemble_jacobian(prob, u).to_dense()
            Jfd = fd_jacobian(prob, u)
            err = np.abs(J - Jfd).max() / max(1.0, np.abs(Jfd).max())
            assert err < 1e-5

    def test_dirichlet_rows_are_identity(self, fig_params, rng):
        prob = fig_problem(fig_params, n=12)
        J = assemble_jacobian(prob, -0.2 + 0.1 * rng.random(prob.n_unknowns)).to_dense()
        assert J[0, 0] == 1.0 and np.all(J[0, 1:] == 0)
        assert J[1, 1] == 1.0 and np.all(np.delete(J[1], 1) == 0)


class TestNewton:
    def test_exact_equilibrium_converges_immediately(self, fig_params):
        poor = two_minima(fig_params)[0]
        prob = fig_problem(fig_params, n=40, eps_D=poor.eps, m_D=poor.m)
        u0 = np.empty(prob.n_unknowns)
        u0[0::2], u0[1::2] = poor.eps, poor.m
        sol, rep = newton_solve(prob, u0)
        assert rep.converged and rep.iterations <= 1
        np.testing.assert_array_equal(sol, u0)

    def test_fig1_fluid_poor_profile(self, fig_params):
        prob = fig_problem(fig_params, n=500)
        poor, rich = two_minima(fig_params)
        guess = make_initial_guess(prob, "fluid_poor_const")
        sol, rep = newton_solve(prob, guess)
        assert rep.converged
        assert abs(sol[-1] - poor.m) <= 0.01
        assert abs(sol[-2] - poor.eps) <= 0.01
        mid = 0.5 * (poor.m + rich.m)
        assert interface_crossings(sol[1::2], mid) == 0
        # independently re-evaluated residual below tolerance
        assert np.abs(assemble_residual(prob, sol)).max() < 1e-10

    def test_fig2_three_guesses(self, fig_params):
        # saddle boundary data admits the rich solution as well
        prob = fig_problem(fig_params, n=500, eps_D=-0.1454, m_D=-0.0897)
        poor, rich = two_minima(fig_params)
        sols = {}
        for kind in ("fluid_poor_const", "fluid_rich_const"):
            sol, rep = newton_solve(prob, make_initial_guess(prob, kind))
            assert rep.converged
            sols[kind] = sol
        assert abs(sols["fluid_poor_const"][-1] - poor.m) <= 0.01
        assert abs(sols["fluid_rich_const"][-1] - rich.m) <= 0.01
        # non-uniqueness witness: distinct solutions under identical data
        d = np.sqrt(np.mean((sols["fluid_poor_const"] - sols["fluid_rich_const"]) ** 2))
        assert d > 0.01

    def test_no_convergence_error(self, fig_params):
        prob = fig_problem(fig_params, n=60)
        guess = make_initial_guess(prob, "fluid_poor_const")
        with pytest.raises(NoConvergenceError):
            newton_solve(prob, guess, NewtonConfig(max_iters=1, ptc_rescue=False))

    def test_undamped_newton_on_benign_problem(self):
        par = ModelParams(a=0.5, b=1.0, p=0.1, alpha=0.0, k1=1e-3, k2=5e-4, k3=1e-3)
        prob = fig_problem(par, n=60, eps_D=-0.12, m_D=-0.11)
        u0 = np.full(prob.n_unknowns, -0.1)
        u0[0], u0[1] = -0.12, -0.11
        sol, rep = newton_solve(prob, u0, NewtonConfig(damping="none"))
        assert rep.converged
        assert np.abs(assemble_residual(prob, sol)).max() < 1e-10

    def test_report_csv(self, fig_params, tmp_path):
        prob = fig_problem(fig_params, n=60)
        sol, rep = newton_solve(prob, make_initial_guess(prob, "fluid_poor_const"))
        path = tmp_path / "iters.csv"
        rep.to_csv(path)
        rows = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
        assert rows.shape[0] == len(rep.residual_norms)


class TestInitialGuesses:
    def test_poor_constant_values(self, fig_params):
        prob = fig_problem(fig_params, n=50)
        poor = two_minima(fig_params)[0]
        u = make_initial_guess(prob, "fluid_poor_const")
        assert u[0] == prob.eps_D and u[1] == prob.m_D
        np.testing.assert_allclose(u[2::2], poor.eps, atol=1e-12)
        np.testing.assert_allclose(u[3::2], poor.m, atol=1e-12)

    def test_two_phase_endpoints_pinned(self, fig_params):
        prob = fig_problem(fig_params, n=200)
        poor, rich = two_minima(fig_params)
        u = make_initial_guess(prob, "two_phase")
        # Dirichlet rows carry the problem's data, interior tail the phases
        assert u[0] == prob.eps_D and u[1] == prob.m_D
        assert abs(u[-2] - rich.eps) < 1e-8 and abs(u[-1] - rich.m) < 1e-8
        mid = 0.5 * (poor.m + rich.m)
        assert interface_crossings(u[1::2], mid) == 1

    def test_linear_preseed_midpoint(self, fig_params):
        # the two-phase pre-seed interpolates linearly between the phases
        poor, rich = two_minima(fig_params)
        x = np.linspace(0, 1, 11)
        lin_e = poor.eps + (rich.eps - poor.eps) * x
        lin_m = poor.m + (rich.m - poor.m) * x
        assert lin_e[5] == pytest.approx(0.5 * (poor.eps + rich.eps))
        assert lin_m[5] == pytest.approx(0.5 * (poor.m + rich.m))

    def test_unknown_kind(self, fig_params):
        with pytest.raises(ValueError):
            make_initial_guess(fig_problem(fig_params, n=20), "sharp")


class TestContinuation:
    def test_single_value_matches_newton(self, fig_params):
        prob = fig_problem(fig_params, n=200)
        guess = make_initial_guess(prob, "fluid_poor_const")
        sols = continuation_in_k2(prob, [fig_params.k2], guess)
        direct, _ = newton_solve(prob, guess)
        np.testing.assert_allclose(sols[0][1], direct, atol=1e-12)

    def test_three_k2_values_and_path_independence(self, fig_params):
        prob = fig_problem(fig_params, n=200)
        guess = make_initial_guess(prob, "fluid_poor_const")
        ks = [1.0e-3, 0.8e-3, 0.2e-3]
        down = continuation_in_k2(prob, ks, guess)
        up = continuation_in_k2(prob, ks[::-1], guess)
        assert all(rep.converged for _, _, rep in down)
        by_k_down = {k: s for k, s, _ in down}
        by_k_up = {k: s for k, s, _ in up}
        for k in ks:
            assert np.abs(by_k_down[k] - by_k_up[k]).max() < 1e-8


class TestCrossSolverConsistency:
    def test_newton_solution_is_near_stationary_for_evolution(self, fig_params):
        # the staggered/collocated boundary rows differ at first order, so
        # the first-step increment is bounded but not tiny; the evolution
        # must stay next to the Newton solution instead of drifting off
        n = 400
        grid = build_grid(0.0, 1.0, n)
        prob = StationaryProblem(grid, fig_params, eps_D=-0.141, m_D=-0.13)
        sol, _ = newton_solve(prob, make_initial_guess(prob, "fluid_poor_const"))
        eps0 = sol[0::2].copy()
        m_nodes = sol[1::2]
        m0 = 0.5 * (m_nodes[:-1] + m_nodes[1:])
        rep = max_stable_tau(1.0, grid.h, fig_params.k2)
        tau = 0.9 * rep.tau_max
        cfg = ThetaSchemeConfig(theta=1.0, tau=tau, T=1.0, steady_tol=0.0,
                                cross_stencil="centered", monitor_stride=1)
        res = run_evolution(grid, cfg, fig_params,
                            (f1_table(fig_params), f2_table(fig_params)),
                            (eps0, m0), (-0.141, -0.13))
        first_residual = res.monitors["residual"][1]
        assert first_residual < 0.05
        d_eps = res.state.eps.values - eps0
        d_m = res.state.m.values - m0
        drift = np.sqrt(grid.h * (np.sum(d_eps ** 2) + np.sum(d_m ** 2)))
        assert drift < 1e-3


class TestExport:
    def test_solution_csv(self, fig_params, tmp_path, rng):
        grid = build_grid(0.0, 1.0, 30)
        u = rng.standard_normal(62)
        path = tmp_path / "sol.csv"
        solution_to_csv(u, grid, path)
        rows = np.loadtxt(path, delimiter=",", skiprows=1)
        np.testing.assert_array_equal(rows[:, 1], u[0::2])
        np.testing.assert_array_equal(rows[:, 2], u[1::2])
