"""
Builtin benchmark problems and their closed-form oracles.

lqr1d     x' = u, g = -e^{-rho t}(x^2 + u^2), rho = 1, x0 = 1, P = [-10, 10]
ramsey    x' = A x^alpha - delta x - u, g = 2 e^{-rho t} sqrt(u), x0 = 0.5, P = [0.01, 2]
absvalue  x' = u, g = -e^{-t} sqrt(x^2 + 1e-12), x0 = 1, P = {-1, 1}
"""

from __future__ import annotations

import math
from typing import Any, Callable, Dict, Mapping, NamedTuple, Optional, Union

import numpy as np

from .constants import BUILTIN_PROBLEMS
from .errors import UnknownProblemError
from .problem_model import Box, ControlProblem, FiniteSet, zero_payoff

ABS_SMOOTHING = 1e-12

LQR_RHO = 1.0
RAMSEY_A = 1.0
RAMSEY_ALPHA = 0.5
RAMSEY_DELTA = 0.05
RAMSEY_RHO = 0.05


def _control_sum_sq(u: np.ndarray) -> "np.ndarray | float":
    u = np.asarray(u, dtype=float)
    return np.sum(u * u, axis=-1)


def _lqr1d(grid_per_axis: Optional[int]) -> ControlProblem:
    rho = LQR_RHO

    def f(t: float, x: np.ndarray, u: np.ndarray) -> np.ndarray:
        return np.array(u, dtype=float)

    def g(t: float, x: np.ndarray, u: np.ndarray) -> "np.ndarray | float":
        return -math.exp(-rho * t) * (float(x[0] ** 2) + _control_sum_sq(u))

    return ControlProblem(
        state_dim=1,
        control_dim=1,
        x0=np.array([1.0]),
        dynamics=f,
        dynamics_jac_x=lambda t, x, u: np.zeros((1, 1)),
        payoff=g,
        payoff_grad_x=lambda t, x, u: -2.0 * math.exp(-rho * t) * np.asarray(x, dtype=float),
        control_set=Box([-10.0], [10.0], grid_per_axis),
        label="lqr1d",
    )


def _ramsey(grid_per_axis: Optional[int]) -> ControlProblem:
    A, alpha, delta, rho = RAMSEY_A, RAMSEY_ALPHA, RAMSEY_DELTA, RAMSEY_RHO

    # Output vanishes without capital, which keeps f finite for x <= 0
    def output(x: float) -> float:
        return A * x ** alpha if x > 0.0 else 0.0

    def f(t: float, x: np.ndarray, u: np.ndarray) -> np.ndarray:
        u = np.asarray(u, dtype=float)
        return output(float(x[0])) - delta * float(x[0]) - u

    def jac(t: float, x: np.ndarray, u: np.ndarray) -> np.ndarray:
        k = float(x[0])
        slope = alpha * A * k ** (alpha - 1.0) if k > 0.0 else 0.0
        return np.array([[slope - delta]])

    def g(t: float, x: np.ndarray, u: np.ndarray) -> "np.ndarray | float":
        u = np.asarray(u, dtype=float)
        return 2.0 * math.exp(-rho * t) * np.sqrt(np.maximum(u[..., 0], 0.0))

    return ControlProblem(
        state_dim=1,
        control_dim=1,
        x0=np.array([0.5]),
        dynamics=f,
        dynamics_jac_x=jac,
        payoff=g,
        payoff_grad_x=lambda t, x, u: np.zeros(1),
        control_set=Box([0.01], [2.0], grid_per_axis),
        label="ramsey",
    )


def _absvalue(grid_per_axis: Optional[int]) -> ControlProblem:
    def g(t: float, x: np.ndarray, u: np.ndarray) -> "np.ndarray | float":
        value = -math.exp(-t) * math.sqrt(float(x[0]) ** 2 + ABS_SMOOTHING)
        u = np.asarray(u)
        return np.full(u.shape[0], value) if u.ndim == 2 else value

    def grad(t: float, x: np.ndarray, u: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        return -math.exp(-t) * x / math.sqrt(float(x[0]) ** 2 + ABS_SMOOTHING)

    return ControlProblem(
        state_dim=1,
        control_dim=1,
        x0=np.array([1.0]),
        dynamics=lambda t, x, u: np.array(u, dtype=float),
        dynamics_jac_x=lambda t, x, u: np.zeros((1, 1)),
        payoff=g,
        payoff_grad_x=grad,
        control_set=FiniteSet([[-1.0], [1.0]]),
        label="absvalue",
    )


_BUILDERS: Dict[str, Callable[[Optional[int]], ControlProblem]] = {
    "lqr1d": _lqr1d,
    "ramsey": _ramsey,
    "absvalue": _absvalue,
}


def builtin_problem(name: str, grid_per_axis: Optional[int] = None) -> ControlProblem:
    """Builtin benchmark by name; ``grid_per_axis`` overrides the Box lattice."""
    try:
        builder = _BUILDERS[name]
    except KeyError:
        raise UnknownProblemError(name, list(BUILTIN_PROBLEMS)) from None
    return builder(grid_per_axis)


def problem_from_spec(spec: Union[str, Mapping[str, Any]], grid_per_axis: Optional[int] = None) -> ControlProblem:
    """
    Builtin name, or an inline object deriving from a builtin:
    ``{"base": name, "x0": [...], "payoff": "zero"|"base", "control_set":
    {"kind": "box", "lower", "upper"[, "grid_per_axis"]} | {"kind": "finite", "points"}}``.
    """
    if isinstance(spec, str):
        return builtin_problem(spec, grid_per_axis)
    problem = builtin_problem(str(spec["base"]), grid_per_axis)
    if "x0" in spec:
        problem = problem.with_x0(spec["x0"])
    if spec.get("payoff", "base") == "zero":
        problem = zero_payoff(problem)
    cs = spec.get("control_set")
    if cs is not None:
        if cs["kind"] == "box":
            problem = problem.with_control_set(Box(cs["lower"], cs["upper"], cs.get("grid_per_axis", grid_per_axis)))
        else:
            problem = problem.with_control_set(FiniteSet(cs["points"]))
    return problem


class LqrOracle(NamedTuple):
    k: float
    J_star: float
    lam: float
    psi_closed_form: Callable[[float], float]
    u_feedback: Callable[[float], float]


def oracle_lqr(rho: float, x0: float) -> LqrOracle:
    """
    Riccati oracle of the discounted scalar LQR: ``k`` is the positive root
    of ``k^2 + rho k - 1 = 0``, and psi is normalized on the unit sphere.
    """
    if not rho > 0.0:
        raise ValueError(f"rho must be positive, got {rho}")
    k = (-rho + math.sqrt(rho * rho + 4.0)) / 2.0
    lam = 1.0 / math.sqrt(1.0 + 4.0 * k * k * x0 * x0)

    def psi(t: float) -> float:
        return -2.0 * k * lam * x0 * math.exp(-(k + rho) * t)

    return LqrOracle(k=k, J_star=-k * x0 * x0, lam=lam, psi_closed_form=psi, u_feedback=lambda x: -k * x)


def oracle_ramsey_steady_state(
    A: float = RAMSEY_A,
    alpha: float = RAMSEY_ALPHA,
    delta: float = RAMSEY_DELTA,
    rho: float = RAMSEY_RHO,
) -> float:
    """Modified golden rule: ``alpha A x^(alpha-1) = rho + delta``."""
    return (alpha * A / (rho + delta)) ** (1.0 / (1.0 - alpha))


def oracle_absvalue() -> float:
    """Relaxed optimum: full speed to the origin by t = 1, then hold by chattering."""
    return -math.exp(-1.0)


def ramsey_bench_problem(grid_per_axis: Optional[int] = None) -> ControlProblem:
    """
    The ramsey builtin started at x0 = 20 with P = [0.01, 5], so the
    steady state (consumption 3.75 at x* = 25) is reachable within P.
    """
    return builtin_problem("ramsey").with_control_set(Box([0.01], [5.0], grid_per_axis)).with_x0([20.0])


__all__ = [
    "LqrOracle",
    "builtin_problem",
    "oracle_absvalue",
    "oracle_lqr",
    "oracle_ramsey_steady_state",
    "problem_from_spec",
    "ramsey_bench_problem",
]
