"""
Shared fixtures: small hand-built problems and solver options sized for
quick tests.
"""

import math

import numpy as np
import pytest

from horizon_pmp.benchmarks import builtin_problem
from horizon_pmp.pmp_finite import SolveOptions
from horizon_pmp.problem_model import Box, ControlProblem, FiniteSet, zero_payoff


def make_problem(
    dynamics,
    payoff=None,
    control_set=None,
    x0=(0.0,),
    jac=None,
    grad=None,
    label="test",
):
    """Scalar-state problem; missing derivatives default to zero."""
    x0 = np.atleast_1d(np.asarray(x0, dtype=float))
    m = x0.size
    control_set = control_set if control_set is not None else Box([-1.0], [1.0], 21)

    def zero_g(t, x, u):
        u = np.asarray(u)
        return np.zeros(u.shape[0]) if u.ndim == 2 else 0.0

    return ControlProblem(
        state_dim=m,
        control_dim=control_set.dim,
        x0=x0,
        dynamics=dynamics,
        dynamics_jac_x=jac or (lambda t, x, u: np.zeros((m, m))),
        payoff=payoff or zero_g,
        payoff_grad_x=grad or (lambda t, x, u: np.zeros(m)),
        control_set=control_set,
        label=label,
    )


def velocity(t, x, u):
    """x' = u"""
    return np.array(u, dtype=float)


@pytest.fixture
def problem_factory():
    return make_problem


@pytest.fixture
def integrator_problem():
    """x' = u, g = 0, P = {-1, 1}, x0 = 0"""
    return make_problem(velocity, control_set=FiniteSet([[-1.0], [1.0]]))


@pytest.fixture
def lqr():
    return builtin_problem("lqr1d")


@pytest.fixture
def lqr_fine():
    """lqr1d with a 0.05 lattice"""
    return builtin_problem("lqr1d", grid_per_axis=401)


@pytest.fixture
def lqr_zero():
    return zero_payoff(builtin_problem("lqr1d"))


@pytest.fixture
def quick_opts():
    return SolveOptions(grid_steps_per_unit_time=10, max_iters=200)


@pytest.fixture
def fast_opts():
    return SolveOptions(grid_steps_per_unit_time=20, max_iters=300)


@pytest.fixture
def golden_k():
    return (math.sqrt(5.0) - 1.0) / 2.0
