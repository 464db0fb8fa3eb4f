#!/usr/bin/env python3
"""
Tests for horizon_pmp.pmp_finite
"""

import math

import numpy as np
import pytest

from horizon_pmp.benchmarks import builtin_problem, oracle_lqr
from horizon_pmp.errors import ConfigError, DegenerateMultiplierError
from horizon_pmp.odeint import ControlSignal, TimeGrid, Trajectory, sample
from horizon_pmp.pmp_finite import (
    Extremal,
    ExtremalResiduals,
    SolveOptions,
    control_cost,
    integrate_coupled,
    node_gaps,
    normalize,
    solve_fixed_endpoint,
    solve_free_endpoint,
)
from horizon_pmp.problem_model import Box

from .conftest import make_problem, velocity


def tracking_payoff(t, x, u):
    """-e^{-t} (u - 0.3)^2: the maximizer is 0.3 whatever psi is"""
    u = np.asarray(u, dtype=float)
    return -math.exp(-t) * np.sum((u - 0.3) ** 2, axis=-1)


def effort_payoff(t, x, u):
    u = np.asarray(u, dtype=float)
    return -math.exp(-t) * np.sum(u * u, axis=-1)


@pytest.fixture
def tracking():
    return make_problem(velocity, payoff=tracking_payoff, control_set=Box([-1.0], [1.0], 21))


class TestSolveOptions:
    """Validation of solver options"""

    @pytest.mark.parametrize(
        "kwargs",
        [
            {"max_iters": 0},
            {"damping": 0.0},
            {"damping": 1.5},
            {"tol_gap": -1.0},
            {"cauchy_tol": -1e-3},
            {"grid_steps_per_unit_time": 0},
        ],
    )
    def test_invalid_values_raise(self, kwargs):
        with pytest.raises(ConfigError):
            SolveOptions(**kwargs)

    def test_defaults(self):
        opts = SolveOptions()
        assert opts.max_iters == 500
        assert opts.damping == 0.5
        assert opts.tol_gap == 1e-6
        assert opts.grid_steps_per_unit_time == 100

    def test_grid_for_horizon(self):
        grid = SolveOptions(grid_steps_per_unit_time=10).grid(2.5)
        assert grid.n_steps == 25
        with pytest.raises(ValueError):
            SolveOptions().grid(0.0)


class TestFreeEndpoint:
    """Forward-backward sweep with psi(T) = 0"""

    def test_result_is_normalized(self, lqr, quick_opts):
        """lambda^2 + |psi(0)|^2 = 1 and psi(T) = 0 exactly"""
        ext = solve_free_endpoint(lqr, 5.0, quick_opts)
        assert ext.multiplier.is_normalized(1e-9)
        assert ext.psi.values[-1].tolist() == [0.0]
        assert ext.residual.terminal_psi_norm == 0.0
        assert 0.0 < ext.lam <= 1.0

    def test_tracking_problem_converges(self, tracking, quick_opts):
        """The maximizer is reached and applied on every cell"""
        ext = solve_free_endpoint(tracking, 2.0, quick_opts)
        assert ext.converged
        assert ext.residual.max_gap <= 1e-6
        assert np.allclose(ext.u.values[:, 0], 0.3)
        assert ext.residual.state_defect == 0.0

    def test_warm_start_converges_immediately(self, tracking, quick_opts):
        """Starting from a converged control takes one iteration"""
        cold = solve_free_endpoint(tracking, 2.0, quick_opts)
        warm = solve_free_endpoint(tracking, 2.0, quick_opts, warm_start=cold.u)
        assert cold.iterations > 1
        assert warm.iterations == 1
        assert np.array_equal(warm.u.values, cold.u.values)

    def test_warm_start_from_shorter_horizon(self, tracking, quick_opts):
        """Cells past the warm control's horizon still get a control"""
        short = solve_free_endpoint(tracking, 1.0, quick_opts)
        ext = solve_free_endpoint(tracking, 2.0, quick_opts, warm_start=short.u)
        assert ext.converged
        assert ext.u.grid.t1 == 2.0

    def test_iteration_cap_flags_result(self, lqr):
        """One iteration from the tie-break point cannot converge"""
        ext = solve_free_endpoint(lqr, 5.0, SolveOptions(max_iters=1, grid_steps_per_unit_time=10))
        assert not ext.converged
        assert ext.iterations == 1
        assert ext.residual.max_gap > 0.0

    def test_zero_payoff_has_zero_adjoint(self, lqr_zero, quick_opts):
        """g = 0 gives psi = 0, lambda = 1 and immediate convergence"""
        ext = solve_free_endpoint(lqr_zero, 5.0, quick_opts)
        assert ext.converged
        assert ext.iterations == 1
        assert ext.lam == 1.0
        assert not np.any(ext.psi.values)
        assert ext.payoff == 0.0

    def test_payoff_matches_control_cost(self, lqr, quick_opts):
        ext = solve_free_endpoint(lqr, 5.0, quick_opts)
        assert control_cost(lqr, ext.u) == pytest.approx(ext.payoff, abs=1e-12)

    def test_accepted_payoffs_increase(self, lqr, quick_opts):
        """Every accepted sweep step raises J; the result carries the last one"""
        ext = solve_free_endpoint(lqr, 5.0, quick_opts)
        history = ext.payoff_history
        assert len(history) > 1
        assert all(b > a for a, b in zip(history, history[1:]))
        assert ext.payoff == history[-1]

    def test_lattice_limited_result_has_no_improving_switch(self, lqr, quick_opts):
        """Switching the worst cell to its maximizer does not raise J"""
        ext = solve_free_endpoint(lqr, 5.0, quick_opts)
        assert ext.converged
        idx = lqr.lattice.nearest(ext.u.values)
        best_idx, gaps = node_gaps(lqr, ext.x, ext.psi, ext.lam, idx)
        if not ext.lattice_limited:
            assert ext.residual.max_gap <= quick_opts.tol_gap * max(abs(ext.payoff), 1.0)
            return
        k = int(np.argmax(gaps))
        values = ext.u.values.copy()
        values[k] = lqr.lattice.points[best_idx[k]]
        switched = control_cost(lqr, ControlSignal(ext.u.grid, values))
        assert switched <= ext.payoff + 1e-14 * max(abs(ext.payoff), 1.0)

    def test_warm_start_holds_last_cell(self, tracking):
        """Cells past a shorter warm control's horizon repeat its last value"""
        grid = TimeGrid(0.0, 1.0, 10)
        warm = ControlSignal(grid, [[0.3]] * 9 + [[0.5]])
        ext = solve_free_endpoint(tracking, 2.0, SolveOptions(grid_steps_per_unit_time=10, max_iters=1), warm_start=warm)
        assert ext.u.values[10:, 0] == pytest.approx([0.5] * 10)

    def test_logger_receives_progress(self, tracking, quick_opts, mocker):
        logger = mocker.Mock()
        solve_free_endpoint(tracking, 1.0, quick_opts, logger=logger)
        assert logger.debug.called
        logger.info.assert_called_once()
        assert not logger.warn.called

    @pytest.mark.slow
    def test_lqr_matches_riccati_oracle(self):
        """J, lambda and psi on [0, 10] agree with the closed form"""
        problem = builtin_problem("lqr1d", grid_per_axis=2001)
        oracle = oracle_lqr(1.0, 1.0)
        ext = solve_free_endpoint(problem, 20.0, SolveOptions())
        assert ext.payoff == pytest.approx(oracle.J_star, abs=1e-3)
        assert ext.lam == pytest.approx(oracle.lam, abs=5e-3)
        for t in np.linspace(0.0, 10.0, 21):
            assert sample(ext.psi, float(t))[0] == pytest.approx(oracle.psi_closed_form(float(t)), abs=5e-3)

    @pytest.mark.slow
    def test_lqr_default_lattice_converges(self, lqr, golden_k):
        """101-point lattice, default options, T = 20: u(0) within 0.02 of -k"""
        ext = solve_free_endpoint(lqr, 20.0, SolveOptions())
        assert ext.converged
        assert ext.iterations < SolveOptions().max_iters
        assert ext.u.values[0, 0] == pytest.approx(-golden_k, abs=0.02)
        assert ext.residual.state_defect <= 1e-9

    @pytest.mark.slow
    def test_grid_refinement_moves_u0_by_at_most_one_cell(self, lqr):
        """Doubling the steps per unit time changes u(0) by at most the lattice spacing"""
        coarse = solve_free_endpoint(lqr, 10.0, SolveOptions(grid_steps_per_unit_time=50))
        fine = solve_free_endpoint(lqr, 10.0, SolveOptions(grid_steps_per_unit_time=100))
        assert coarse.converged and fine.converged
        assert abs(coarse.u.values[0, 0] - fine.u.values[0, 0]) <= 0.2 + 1e-9


class TestNormalize:
    """Rescaling (lambda, psi) onto the unit sphere"""

    def _extremal(self, lam, psi_value):
        grid = TimeGrid(0.0, 1.0, 2)
        return Extremal(
            x=Trajectory(grid, [0.0, 0.0, 0.0]),
            u=ControlSignal.constant(grid, [0.0]),
            psi=Trajectory(grid, [psi_value] * 3),
            lam=lam,
            horizon=1.0,
            residual=ExtremalResiduals(0.0, 0.0, 2.0, 0.0),
        )

    def test_scales_pair_and_residuals(self):
        ext = normalize(self._extremal(3.0, 4.0))
        assert ext.lam == pytest.approx(0.6)
        assert ext.psi.values[:, 0].tolist() == pytest.approx([0.8] * 3)
        assert ext.residual.max_gap == pytest.approx(0.4)

    def test_degenerate_pair_raises(self):
        with pytest.raises(DegenerateMultiplierError):
            normalize(self._extremal(0.0, 0.0))


class TestFixedEndpoint:
    """Single shooting on psi(0)"""

    @pytest.fixture
    def effort(self):
        return make_problem(velocity, payoff=effort_payoff, control_set=Box([-1.0], [1.0], 201))

    def test_reaches_target(self, effort):
        """x' = u, g = -e^-t u^2: psi(0) = 1/(e - 1) hits x(1) = 0.5"""
        ext = solve_fixed_endpoint(effort, 1.0, [0.5], SolveOptions())
        assert ext.residual.endpoint_defect <= 1e-2
        assert ext.multiplier.is_normalized()
        psi0 = ext.psi.values[0, 0] / ext.lam
        assert psi0 == pytest.approx(1.0 / (math.e - 1.0), rel=5e-2)

    def test_target_must_match_state_dim(self, effort):
        with pytest.raises(ValueError):
            solve_fixed_endpoint(effort, 1.0, [0.5, 0.5])

    def test_coupled_integration_with_custom_rule(self, effort):
        """A rule that always picks the first point drives x down at full speed"""
        grid = TimeGrid(0.0, 1.0, 10)
        x, psi, idx = integrate_coupled(effort, grid, [0.0], [0.0], rule=lambda t, x, p: 0)
        assert idx.tolist() == [0] * 10
        assert x.final()[0] == pytest.approx(-1.0)
        assert not np.any(psi.values)

    def test_integrator_reaches_unit_target_with_full_speed(self):
        """x' = u on [-1, 1], g = 0: hitting x(1) = 1 needs u = 1 on every cell"""
        problem = make_problem(velocity, control_set=Box([-1.0], [1.0], 3))
        ext = solve_fixed_endpoint(problem, 1.0, [1.0], SolveOptions(grid_steps_per_unit_time=10))
        assert ext.converged
        assert ext.u.values[:, 0].tolist() == [1.0] * 10
        assert np.all(ext.psi.values == ext.psi.values[0])
        assert ext.residual.endpoint_defect <= 1e-8

    def test_bisection_settles_on_a_jump(self, mocker):
        """x(1) only takes multiples of 0.1, so 0.05 is missed by half a step, flagged"""
        coarse = make_problem(velocity, payoff=effort_payoff, control_set=Box([-1.0], [1.0], 3))
        logger = mocker.Mock()
        ext = solve_fixed_endpoint(coarse, 1.0, [0.05], SolveOptions(grid_steps_per_unit_time=10), logger=logger)
        assert not ext.converged
        assert ext.residual.endpoint_defect == pytest.approx(0.05, abs=1e-9)
        assert logger.log.call_args.args[0] == "WARN"

    @pytest.mark.slow
    def test_free_endpoint_state_as_target_recovers_adjoint(self, lqr):
        """Pinning x(5) to the free solution's x(5) gives back its psi(0)"""
        opts = SolveOptions()
        free = solve_free_endpoint(lqr, 5.0, opts)
        fixed = solve_fixed_endpoint(lqr, 5.0, free.x.final(), opts)
        assert fixed.residual.endpoint_defect < 1e-2
        assert abs(fixed.psi.values[0, 0] - free.psi.values[0, 0]) <= 1e-3
