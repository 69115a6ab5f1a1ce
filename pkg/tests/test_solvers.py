"""Iteration schemes: contraction, reductions, witnesses, and stopping logic."""

import math

import numpy as np
import pytest

from prsplit.core import (
    CompositeProblem,
    LeverageParams,
    ProxFunction,
    RegularityParams,
)
from prsplit.errors import NotSmooth
from prsplit.harness import make_least_squares_problem
from prsplit.proxlib import diagonal_quadratic, zero_function
from prsplit.rates import delta_star, optimal_params, optimal_rate, rate_r1, rate_r2
from prsplit.solvers import (
    IterateState,
    SolverConfig,
    drs_solve,
    fista_solve,
    prs_classic_solve,
    prs_lev_solve,
    prs_lev_step,
)

from conftest import interior_delta

TIGHT_REG = RegularityParams(rho=1.0, alpha=0.25, mu=0.0, beta=1.0)


def tight_problem(reg=TIGHT_REG):
    f = diagonal_quadratic(np.array([reg.rho, 1.0 / reg.alpha]))
    g = diagonal_quadratic(np.array([reg.mu, 1.0 / reg.beta]))
    origin = np.zeros(2)
    return CompositeProblem(
        f=f, g=g, regularity=reg,
        solution_oracle=origin, fixed_point_oracle=lambda lp: origin,
    )


def random_instance(rng, m=8, n=10, p=9, homogeneous=False):
    A = 0.5 * rng.random((n, m))
    B = 3.0 * rng.random((p, m))
    a = None if homogeneous else rng.standard_normal(n)
    b = None if homogeneous else rng.standard_normal(p)
    return make_least_squares_problem(A, a, B, b)


class TestLeveragedStep:
    def test_reflected_point_identity(self, rng):
        problem = random_instance(rng)
        lp = optimal_params(problem.regularity, delta_star(problem.regularity))
        state = IterateState(z=rng.standard_normal(problem.dimension))
        out = prs_lev_step(state, problem, lp)
        t, e = lp.tau, lp.eta
        expected_y = (2 * t / (t + e)) * out.x - ((t - e) / (t + e)) * state.z
        np.testing.assert_allclose(out.y, expected_y, atol=1e-14)

    def test_tight_example_single_step_contracts_by_r_star(self):
        problem = tight_problem()
        lp = optimal_params(TIGHT_REG, delta_star(TIGHT_REG))
        z0 = np.array([1.0, 1.0])
        out = prs_lev_step(IterateState(z=z0), problem, lp)
        r_star = optimal_rate(TIGHT_REG)
        # both coordinates contract by exactly the optimal factor, not just
        # the norm: the map is diagonal with both entries equal to r*
        np.testing.assert_allclose(out.z / z0, r_star, rtol=1e-12)
        assert r_star == pytest.approx(0.116963, abs=1e-6)

    def test_zero_shift_step_equals_classical_prs_step(self, rng):
        problem = random_instance(rng)
        tau = 0.7
        z = rng.standard_normal(problem.dimension)
        out = prs_lev_step(IterateState(z=z), problem, LeverageParams(0.0, 0.0, tau))
        x = problem.f.prox(tau, z)
        p = problem.g.prox(tau, 2 * x - z)
        np.testing.assert_allclose(out.z, z + 2 * (p - x), atol=1e-13)

    def test_reduced_algorithm_at_delta_star(self, rng):
        # with eta = 0 the recurrence collapses to the two-prox short form
        problem = random_instance(rng)
        reg = problem.regularity
        lp = optimal_params(reg, delta_star(reg))
        assert lp.eta == pytest.approx(0.0, abs=1e-14)
        z = rng.standard_normal(problem.dimension)
        out = prs_lev_step(IterateState(z=z), problem, lp)
        d, t = lp.delta, lp.tau
        x = problem.f.prox(t / (1 + d * t), z / (1 + d * t))
        y = 2 * x - z
        p = problem.g.prox(t / (1 - d * t), y / (1 - d * t))
        np.testing.assert_allclose(out.z, z + 2 * (p - x), atol=1e-12)


class TestLeveragedSolve:
    def test_tight_contraction_ratios_all_equal_r_star(self):
        problem = tight_problem()
        lp = optimal_params(TIGHT_REG, delta_star(TIGHT_REG))
        config = SolverConfig(max_iter=20, tol=1e-300, stopping="residual")
        _, _, trace = prs_lev_solve(problem, lp, config, z0=np.array([1.0, 1.0]))
        r_star = optimal_rate(TIGHT_REG)
        ratios = trace.ratios()
        assert len(ratios) == 20
        assert np.nanmax(np.abs(ratios - r_star)) <= 1e-12

    def test_starting_at_fixed_point_stops_immediately(self, rng):
        problem = random_instance(rng)
        lp = optimal_params(problem.regularity, delta_star(problem.regularity))
        z_star = problem.fixed_point_oracle(lp)
        config = SolverConfig(max_iter=50, tol=1e-10)
        _, _, trace = prs_lev_solve(problem, lp, config, z0=z_star)
        assert trace.status == "converged"
        assert trace.iterations <= 1
        assert trace.records[0].residual <= 1e-10

    def test_iteration_count_obeys_the_rate_bound(self, rng):
        problem = random_instance(rng, m=12, n=14, p=13)
        reg = problem.regularity
        lp = optimal_params(reg, delta_star(reg))
        tol = 1e-10
        config = SolverConfig(max_iter=100000, tol=tol, stopping="fixed_point_distance")
        z0 = problem.fixed_point_oracle(lp) + rng.standard_normal(problem.dimension)
        _, _, trace = prs_lev_solve(problem, lp, config, z0=z0)
        assert trace.status == "converged"
        d0 = trace.records[0].dist_to_fixed_point
        r = rate_r1(lp, reg) * rate_r2(lp, reg)
        bound = math.log(tol / d0) / math.log(r) + 1
        assert trace.iterations <= bound

    def test_per_step_contraction_bound(self, rng):
        # ||z_{n+1} - z*|| <= r1*r2*||z_n - z*|| + 1e-10*||z0 - z*|| at every step
        for _ in range(5):
            problem = random_instance(rng)
            reg = problem.regularity
            lp = optimal_params(reg, interior_delta(rng, reg))
            r = rate_r1(lp, reg) * rate_r2(lp, reg)
            config = SolverConfig(max_iter=5000, tol=1e-6, stopping="normalized_error")
            z0 = rng.standard_normal(problem.dimension)
            _, _, trace = prs_lev_solve(problem, lp, config, z0=z0)
            dists = trace.distances()
            d0 = dists[0]
            ratios = trace.ratios()
            next_dists = dists * ratios
            assert np.all(next_dists <= r * dists + 1e-10 * d0)

    def test_final_x_is_first_order_stationary(self, rng):
        problem = random_instance(rng)
        lp = optimal_params(problem.regularity, delta_star(problem.regularity))
        config = SolverConfig(max_iter=50000, tol=1e-13, stopping="fixed_point_distance")
        x, _, trace = prs_lev_solve(problem, lp, config, z0=rng.standard_normal(problem.dimension))
        assert trace.status == "converged"
        grad = problem.f.gradient(x) + problem.g.gradient(x)
        assert np.linalg.norm(grad) <= 1e-6 * (1 + np.linalg.norm(problem.f.gradient(x)))

    def test_zero_shift_solve_matches_classical_sequences(self, rng):
        problem = random_instance(rng)
        tau = 0.9
        config = SolverConfig(max_iter=40, tol=1e-300, stopping="residual")
        z0 = rng.standard_normal(problem.dimension)
        _, z_lev, trace_lev = prs_lev_solve(
            problem, LeverageParams(0.0, 0.0, tau), config, z0=z0
        )
        _, z_classic, trace_classic = prs_classic_solve(problem, tau, config, z0=z0)
        np.testing.assert_allclose(z_lev, z_classic, rtol=1e-12, atol=1e-13)
        np.testing.assert_allclose(
            trace_lev.residuals(), trace_classic.residuals(), rtol=1e-10, atol=1e-14
        )


def axis_indicator_problem():
    """f = indicator of the x-axis (prox projects), g = 0 (prox is identity)."""
    project = ProxFunction(
        prox=lambda gamma, z: np.array([z[0], 0.0]),
        dimension=2,
        value=lambda z: 0.0 if z[1] == 0.0 else math.inf,
    )
    return CompositeProblem(
        f=project, g=zero_function(2), regularity=RegularityParams(0, 0, 0, 0)
    )


class TestClassicAndRelaxed:
    def test_oscillation_witness_period_two(self):
        problem = axis_indicator_problem()
        z0 = np.array([1.0, 1.0])
        finals = []
        for k in range(1, 7):
            config = SolverConfig(max_iter=k, tol=1e-10, stopping="residual")
            _, z, trace = prs_classic_solve(problem, 1.0, config, z0=z0)
            finals.append(z)
            assert trace.status == "max_iter"
        orbit = [z0] + finals
        for n in range(len(orbit) - 2):
            assert np.linalg.norm(orbit[n + 2] - orbit[n]) <= 1e-14
            assert np.linalg.norm(orbit[n + 1] - orbit[n]) > 0.1

    def test_half_relaxation_converges_on_the_witness(self):
        problem = axis_indicator_problem()
        config = SolverConfig(max_iter=50, tol=1e-12, stopping="residual")
        x, z, trace = drs_solve(problem, 1.0, 0.5, config, z0=np.array([1.0, 1.0]))
        assert trace.status == "converged"
        np.testing.assert_allclose(z, [1.0, 0.0], atol=1e-12)
        np.testing.assert_allclose(x, [1.0, 0.0], atol=1e-12)

    def test_full_relaxation_is_bitwise_classic(self, rng):
        problem = random_instance(rng)
        config = SolverConfig(max_iter=25, tol=1e-300, stopping="residual")
        z0 = rng.standard_normal(problem.dimension)
        _, z_a, _ = prs_classic_solve(problem, 0.8, config, z0=z0)
        _, z_b, _ = drs_solve(problem, 0.8, 1.0, config, z0=z0)
        assert np.array_equal(z_a, z_b)

    def test_tight_pair_classical_rate(self):
        # tau = sqrt(alpha/rho) contracts at least as fast as the classical bound
        reg = RegularityParams(rho=0.5, alpha=0.5, mu=0.0, beta=1.0)
        problem = tight_problem(reg)
        tau = math.sqrt(reg.alpha / reg.rho)
        bound = (1 - math.sqrt(reg.alpha * reg.rho)) / (1 + math.sqrt(reg.alpha * reg.rho))
        config = SolverConfig(max_iter=30, tol=1e-300, stopping="residual")
        _, _, trace = prs_classic_solve(
            problem, tau, config, z0=np.array([1.0, 1.0]),
            z_star=np.zeros(2),
        )
        ratios = trace.ratios()
        assert np.nanmax(ratios) <= bound + 1e-12

    def test_relaxed_tuning_meets_its_rate(self):
        # f strongly convex, g smooth: the tuned relaxation contracts at
        # least as fast as 1/(1+sqrt(beta*rho)) empirically
        from prsplit.rates import drs_optimal_rate

        reg = RegularityParams(rho=1.0, alpha=0.25, mu=0.0, beta=1.0)
        problem = tight_problem(reg)
        tau, lam, bound = drs_optimal_rate(reg)
        assert bound == pytest.approx(0.5)
        config = SolverConfig(max_iter=60, tol=1e-300, stopping="residual")
        _, _, trace = drs_solve(
            problem, tau, lam, config, z0=np.array([1.0, 1.0]), z_star=np.zeros(2)
        )
        ratios = trace.ratios()
        # ignore the last few steps where distances reach the float floor
        assert np.nanmax(ratios[:40]) <= bound + 1e-9

    def test_divergence_detected_for_a_fake_oracle(self, rng):
        # not a prox of anything: an expansive map, which the theory forbids
        expanding = ProxFunction(prox=lambda gamma, x: 1.5 * x, dimension=3)
        problem = CompositeProblem(
            f=expanding, g=zero_function(3),
            regularity=RegularityParams(0, 0, 0, 0),
        )
        config = SolverConfig(max_iter=1000, tol=1e-12, stopping="residual")
        _, _, trace = prs_classic_solve(problem, 1.0, config, z0=np.ones(3))
        assert trace.status == "diverged"

    def test_gf_ordering_still_converges(self, rng):
        problem = random_instance(rng)
        config = SolverConfig(max_iter=20000, tol=1e-11, stopping="residual")
        x, _, trace = prs_classic_solve(
            problem, 1.0, config, z0=rng.standard_normal(problem.dimension),
            ordering="gf",
        )
        assert trace.status == "converged"
        np.testing.assert_allclose(x, problem.solution_oracle, atol=1e-7)

    def test_parameter_validation(self, rng):
        problem = random_instance(rng)
        with pytest.raises(ValueError):
            drs_solve(problem, 1.0, 0.0)
        with pytest.raises(ValueError):
            drs_solve(problem, -1.0, 0.5)
        with pytest.raises(ValueError):
            prs_classic_solve(problem, 1.0, ordering="xy")


class TestFista:
    def test_unconstrained_quadratic_reaches_normal_equations(self, rng):
        m = 6
        A = rng.standard_normal((9, m))
        a = rng.standard_normal(9)
        from prsplit.proxlib import LeastSquaresFn

        f = LeastSquaresFn(A, a)
        x_star = np.linalg.solve(f.gram, f.at_a)
        problem = CompositeProblem(
            f=f.to_prox_function(),
            g=zero_function(m),
            regularity=RegularityParams(f.moduli[0], f.moduli[1], 0.0, 0.0),
            solution_oracle=x_star,
        )
        config = SolverConfig(max_iter=5000, tol=1e-12, stopping="fixed_point_distance")
        x, trace = fista_solve(problem, "forward_on_f", config)
        assert trace.status == "converged"
        np.testing.assert_allclose(x, x_star, atol=1e-10)

    def test_forward_function_must_be_smooth(self, rng):
        problem = random_instance(rng)
        bare = CompositeProblem(
            f=problem.f, g=zero_function(problem.dimension),
            regularity=RegularityParams(problem.regularity.rho, problem.regularity.alpha, 0.0, 0.0),
        )
        with pytest.raises(NotSmooth):
            fista_solve(bare, "forward_on_g")

    def test_step_and_momentum_overrides(self, rng):
        problem = random_instance(rng, homogeneous=True)
        config = SolverConfig(max_iter=20000, tol=1e-9, stopping="fixed_point_distance")
        x, trace = fista_solve(
            problem, "forward_on_f", config,
            step=0.5 * problem.regularity.alpha, momentum=0.0,
        )
        assert trace.status == "converged"
        np.testing.assert_allclose(x, 0.0, atol=1e-8)

    def test_asymptotic_contraction_not_below_leveraged_optimum(self, rng):
        # the leveraged rate lower-bounds what the accelerated baselines do
        problem = random_instance(rng, m=10, n=12, p=11)
        reg = problem.regularity
        config = SolverConfig(max_iter=4000, tol=1e-11, stopping="fixed_point_distance")
        x, trace = fista_solve(problem, "forward_on_f", config)
        dists = trace.distances()
        k = len(dists) // 2
        observed = (dists[-1] / dists[k]) ** (1.0 / (len(dists) - 1 - k))
        assert observed >= optimal_rate(reg)
