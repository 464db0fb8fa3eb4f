#!/usr/bin/env python3
"""
Tests for horizon_pmp.odeint
"""

import math

import numpy as np
import pytest

from horizon_pmp.errors import IntegrationError, RangeError
from horizon_pmp.odeint import (
    ControlSignal,
    TimeGrid,
    Trajectory,
    hermite_sample,
    integrate_backward,
    integrate_forward,
    sample,
)


def decay(t, x):
    return -x


class TestTimeGrid:
    """Uniform grids and cell lookup"""

    @pytest.mark.parametrize("args", [(1.0, 1.0, 10), (0.0, -1.0, 10), (0.0, 1.0, 0), (0.0, math.inf, 5)])
    def test_invalid_grids(self, args):
        """Empty, reversed, stepless and unbounded grids are rejected"""
        with pytest.raises(ValueError):
            TimeGrid(*args)

    def test_nodes_end_exactly_at_t1(self):
        grid = TimeGrid(0.0, 0.3, 3)
        assert grid.nodes[-1] == 0.3
        assert grid.n_nodes == 4
        assert grid.h == pytest.approx(0.1)

    def test_for_horizon(self):
        """Steps scale with the horizon"""
        grid = TimeGrid.for_horizon(2.5, 100)
        assert grid.n_steps == 250
        assert grid.t1 == 2.5

    def test_cells_are_left_closed(self):
        """A node opens its cell; t1 belongs to the last cell"""
        grid = TimeGrid(0.0, 1.0, 10)
        assert grid.cell_index(0.0) == 0
        assert grid.cell_index(0.1) == 1
        assert grid.cell_index(0.15) == 1
        assert grid.cell_index(1.0) == 9

    def test_refine(self):
        assert TimeGrid(0.0, 1.0, 10).refine(4).n_steps == 40


class TestControlSignal:
    """Piecewise-constant controls"""

    def test_value_at_node_is_the_next_cell(self):
        """At a jump the control takes the right-hand value"""
        grid = TimeGrid(0.0, 1.0, 2)
        ctrl = ControlSignal(grid, [[-1.0], [1.0]])
        assert ctrl.at(0.25).tolist() == [-1.0]
        assert ctrl.at(0.5).tolist() == [1.0]
        assert ctrl.at(1.0).tolist() == [1.0]

    def test_cell_count_must_match(self):
        with pytest.raises(ValueError):
            ControlSignal(TimeGrid(0.0, 1.0, 4), [[0.0]] * 5)

    def test_resample_onto_finer_grid(self):
        grid = TimeGrid(0.0, 1.0, 2)
        ctrl = ControlSignal(grid, [[-1.0], [1.0]]).resample(grid.refine(2))
        assert ctrl.values[:, 0].tolist() == [-1.0, -1.0, 1.0, 1.0]


class TestIntegrators:
    """Fixed-step RK4"""

    def test_fourth_order_convergence(self):
        """Halving h divides the error by about 16"""
        errors = []
        for n in (10, 20):
            traj = integrate_forward(decay, [1.0], TimeGrid(0.0, 2.0, n))
            errors.append(abs(traj.final()[0] - math.exp(-2.0)))
        assert 12.0 <= errors[0] / errors[1] <= 20.0

    def test_per_step_params_drive_each_cell(self):
        """x' = u with u = -1 then 1 returns to the start exactly"""
        grid = TimeGrid(0.0, 1.0, 2)
        traj = integrate_forward(lambda t, x, u: u, [0.0], grid, params=[np.array([-1.0]), np.array([1.0])])
        assert traj.values[:, 0].tolist() == pytest.approx([0.0, -0.5, 0.0], abs=1e-15)

    def test_param_count_must_match(self):
        with pytest.raises(ValueError):
            integrate_forward(lambda t, x, u: u, [0.0], TimeGrid(0.0, 1.0, 2), params=[np.zeros(1)])

    def test_backward_recovers_initial_value(self):
        """y' = -y integrated back from e^-1 lands near 1"""
        traj = integrate_backward(decay, [math.exp(-1.0)], TimeGrid(0.0, 1.0, 100))
        assert traj.values[0, 0] == pytest.approx(1.0, abs=1e-9)
        assert traj.final()[0] == math.exp(-1.0)

    def test_blow_up_raises(self):
        """x' = x^2 from x = 1 escapes at t = 1"""
        with np.errstate(over="ignore", invalid="ignore"):
            with pytest.raises(IntegrationError) as info:
                integrate_forward(lambda t, x: x * x, [1.0], TimeGrid(0.0, 2.0, 200))
        assert info.value.index > 0
        assert info.value.time > 0.9

    def test_non_finite_start_raises(self):
        with pytest.raises(IntegrationError):
            integrate_forward(decay, [math.nan], TimeGrid(0.0, 1.0, 2))


class TestSampling:
    """Reading trajectories between nodes"""

    def test_sample_at_node_is_exact(self):
        grid = TimeGrid(0.0, 1.0, 4)
        traj = Trajectory(grid, grid.nodes ** 2)
        assert sample(traj, 0.5)[0] == 0.25

    def test_sample_between_nodes_is_linear(self):
        grid = TimeGrid(0.0, 1.0, 1)
        traj = Trajectory(grid, [0.0, 2.0])
        assert sample(traj, 0.25)[0] == pytest.approx(0.5)

    def test_sample_outside_grid(self):
        traj = Trajectory(TimeGrid(0.0, 1.0, 1), [0.0, 1.0])
        with pytest.raises(RangeError):
            sample(traj, 1.5)

    def test_hermite_reproduces_cubics(self):
        """Cubic Hermite interpolation is exact for t^3"""
        grid = TimeGrid(0.0, 1.0, 4)
        nodes = grid.nodes
        traj = Trajectory(grid, nodes ** 3)
        slopes = 3.0 * nodes ** 2
        derivs = np.stack([slopes[:-1], slopes[1:]], axis=1)[:, :, None]
        for t in (0.1, 0.3, 0.62, 0.99):
            assert hermite_sample(traj, derivs, t)[0] == pytest.approx(t ** 3, abs=1e-14)

    def test_trajectory_rejects_non_finite(self):
        with pytest.raises(IntegrationError):
            Trajectory(TimeGrid(0.0, 1.0, 1), [0.0, math.inf])
