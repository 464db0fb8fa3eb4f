#!/usr/bin/env python3
"""
Tests for horizon_pmp.hamiltonian
"""

import math

import numpy as np
import pytest

from horizon_pmp.benchmarks import builtin_problem
from horizon_pmp.hamiltonian import (
    Multiplier,
    argmax_H,
    argmax_H_penalized,
    eval_H,
    grad_x_H,
    hamiltonian_values,
    penalty_values,
)
from horizon_pmp.problem_model import Box, FiniteSet, finite_difference_jacobian

from .conftest import make_problem, velocity


class TestMultiplier:
    """Normalization bookkeeping for (lambda, psi)"""

    def test_negative_lambda_rejected(self):
        with pytest.raises(ValueError):
            Multiplier(-0.1, 1.0)

    def test_unit_pair(self):
        mult = Multiplier.from_pair(0.6, [0.8])
        assert mult.norm == pytest.approx(1.0)
        assert mult.is_normalized()
        assert not Multiplier.from_pair(1.0, [1.0]).is_normalized()


class TestArgmax:
    """Exhaustive maximization over the lattice"""

    def test_matches_brute_force_evaluation(self, lqr):
        """The batched values agree with one eval_H call per point"""
        x, t, lam, psi = np.array([0.7]), 1.3, 0.5, np.array([-0.4])
        values = hamiltonian_values(lqr, x, t, lam, psi)
        for i in (0, 17, 50, 100):
            assert values[i] == pytest.approx(eval_H(lqr, x, t, lqr.lattice.points[i], lam, psi), rel=1e-14)

    def test_scaling_invariance(self, lqr):
        """Positive scaling of (lambda, psi) never moves the maximizer"""
        rng = np.random.default_rng(7)
        for _ in range(1000):
            x = rng.uniform(-3.0, 3.0, 1)
            t = float(rng.uniform(0.0, 5.0))
            lam = float(rng.uniform(0.0, 1.0))
            psi = rng.uniform(-2.0, 2.0, 1)
            scale = float(rng.uniform(1e-3, 1e3))
            base = argmax_H(lqr, x, t, lam, psi)
            scaled = argmax_H(lqr, x, t, scale * lam, scale * psi)
            assert np.array_equal(base.u_star, scaled.u_star)

    def test_ties_go_to_lex_smallest(self, integrator_problem):
        """With psi = 0 and g = 0 every point ties"""
        result = argmax_H(integrator_problem, [0.0], 0.0, 1.0, [0.0])
        assert result.u_star.tolist() == [-1.0]
        assert result.value == 0.0
        assert math.isinf(result.gap_certificate)

    def test_gap_certificate(self, integrator_problem):
        """H = psi u on {-1, 1} with psi = 2 has gap 4"""
        result = argmax_H(integrator_problem, [0.0], 0.0, 1.0, [2.0])
        assert result.u_star.tolist() == [1.0]
        assert result.gap_certificate == pytest.approx(4.0)

    def test_box_maximizer_matches_feedback(self):
        """For lqr1d the maximizer of psi u - lam e^-t u^2 is psi e^t / (2 lam)"""
        problem = builtin_problem("lqr1d", grid_per_axis=2001)
        result = argmax_H(problem, [1.0], 0.0, 1.0, [-1.2])
        assert result.u_star[0] == pytest.approx(-0.6, abs=1e-9)


class TestGradient:
    """Analytic x-gradient against finite differences"""

    @pytest.mark.parametrize("name", ["lqr1d", "ramsey", "absvalue"])
    def test_matches_finite_differences(self, name):
        problem = builtin_problem(name)
        rng = np.random.default_rng(3)
        pts = problem.lattice.points
        for _ in range(100):
            t = float(rng.uniform(0.0, 5.0))
            x = rng.uniform(0.1, 3.0, 1) * (rng.choice([-1.0, 1.0]) if name != "ramsey" else 1.0)
            u = pts[int(rng.integers(len(pts)))]
            lam = float(rng.uniform(0.0, 1.0))
            psi = rng.uniform(-1.0, 1.0, 1)
            fd = finite_difference_jacobian(lambda y: np.array([eval_H(problem, y, t, u, lam, psi)]), x)
            exact = grad_x_H(problem, x, t, u, lam, psi)
            assert np.allclose(fd.ravel(), exact, rtol=1e-5, atol=1e-6)

    def test_lambda_zero_drops_payoff(self):
        """With lam = 0 only the dynamics term remains"""
        problem = make_problem(
            lambda t, x, u: np.array([2.0 * x[0]]) + 0.0 * np.asarray(u),
            jac=lambda t, x, u: np.array([[2.0]]),
            grad=lambda t, x, u: np.array([np.nan]),
        )
        assert grad_x_H(problem, [1.0], 0.0, [0.0], 0.0, [3.0]).tolist() == [6.0]


class TestPenalized:
    """Argmax of H minus the tie-breaking penalty"""

    def test_penalty_picks_nearest_point_to_reference(self):
        """With H = 0 the penalty alone decides"""
        problem = make_problem(velocity, control_set=Box([0.0], [1.0], 11))
        result = argmax_H_penalized(problem, [0.0], 0.5, 0.0, [0.0], u_ref=[0.42], n=3)
        assert result.u_star[0] == pytest.approx(0.4)

    def test_penalty_shrinks_with_n(self):
        pts = np.array([[0.0], [1.0]])
        p1 = penalty_values(pts, 0.0, [0.0], 1)
        p4 = penalty_values(pts, 0.0, [0.0], 4)
        assert p1.tolist() == [0.0, 1.0]
        assert p4.tolist() == [0.0, 0.25]

    def test_penalty_decays_in_time(self):
        value = penalty_values(np.array([[1.0]]), 2.0, [0.0], 1)[0]
        assert value == pytest.approx(math.exp(-2.0))

    def test_index_must_be_positive(self):
        with pytest.raises(ValueError):
            penalty_values(np.array([[1.0]]), 0.0, [0.0], 0)

    def test_large_n_recovers_plain_argmax(self, integrator_problem):
        """A strict maximizer survives a small penalty"""
        plain = argmax_H(integrator_problem, [0.0], 0.0, 1.0, [1.0])
        penalized = argmax_H_penalized(integrator_problem, [0.0], 0.0, 1.0, [1.0], u_ref=[-1.0], n=100)
        assert np.array_equal(plain.u_star, penalized.u_star)

    def test_finite_set_penalty(self):
        problem = make_problem(velocity, control_set=FiniteSet([[2.0], [-1.0], [0.5]]))
        result = argmax_H_penalized(problem, [0.0], 0.0, 0.0, [0.0], u_ref=[0.0], n=1)
        assert result.u_star.tolist() == [0.5]
