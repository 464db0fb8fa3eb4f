"""
Hamilton-Pontryagin function H = psi . f + lambda * g, its x-gradient, and
exhaustive maximization over the control lattice.

Ties are decided relative to the largest |H| on the lattice, so scaling
``(lambda, psi)`` by any positive constant never changes the maximizer.
Among tied points the lexicographically smallest one wins.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple, Optional, Sequence, Tuple

import numpy as np

from .constants import NORMALIZATION_ATOL, TIE_RTOL
from .problem_model import ControlLattice, ControlProblem


@dataclass(frozen=True)
class Multiplier:
    """Payoff multiplier ``lam`` together with the cached ``|psi(0)|^2``."""

    lam: float
    psi0_norm_sq: float

    def __post_init__(self) -> None:
        if self.lam < 0.0 or not math.isfinite(self.lam):
            raise ValueError(f"lambda must be finite and >= 0, got {self.lam}")

    @classmethod
    def from_pair(cls, lam: float, psi0: Sequence[float]) -> "Multiplier":
        psi0 = np.atleast_1d(np.asarray(psi0, dtype=float))
        return cls(float(lam), float(psi0 @ psi0))

    @property
    def norm(self) -> float:
        return math.sqrt(self.lam * self.lam + self.psi0_norm_sq)

    def is_normalized(self, atol: float = NORMALIZATION_ATOL) -> bool:
        return abs(self.psi0_norm_sq + self.lam * self.lam - 1.0) <= atol


class ArgmaxResult(NamedTuple):
    u_star: np.ndarray
    value: float
    gap_certificate: float


def _vec(a: Sequence[float]) -> np.ndarray:
    return np.atleast_1d(np.asarray(a, dtype=float))


def eval_H(
    problem: ControlProblem,
    x: Sequence[float],
    t: float,
    u: Sequence[float],
    lam: float,
    psi: Sequence[float],
) -> float:
    x, u, psi = _vec(x), _vec(u), _vec(psi)
    value = float(psi @ problem.f(t, x, u))
    if lam != 0.0:
        value += lam * float(problem.g(t, x, u))
    return value


def grad_x_H(
    problem: ControlProblem,
    x: Sequence[float],
    t: float,
    u: Sequence[float],
    lam: float,
    psi: Sequence[float],
) -> np.ndarray:
    """``(df/dx)^T psi + lam * dg/dx`` from the problem's own derivatives."""
    x, u, psi = _vec(x), _vec(u), _vec(psi)
    grad = problem.jac_x(t, x, u).T @ psi
    if lam != 0.0:
        grad = grad + lam * problem.grad_g(t, x, u)
    return grad


def hamiltonian_values(
    problem: ControlProblem,
    x: Sequence[float],
    t: float,
    lam: float,
    psi: Sequence[float],
    points: Optional[np.ndarray] = None,
) -> np.ndarray:
    """H at every lattice point (or at ``points``), one batched f/g call each."""
    x, psi = _vec(x), _vec(psi)
    pts = problem.lattice.points if points is None else np.atleast_2d(points)
    values = problem.f(t, x, pts) @ psi
    if lam != 0.0:
        values = values + lam * np.asarray(problem.g(t, x, pts), dtype=float)
    return np.asarray(values, dtype=float)


def select_max(lattice: ControlLattice, values: np.ndarray) -> Tuple[int, float, float]:
    """
    Index of the maximizer, the maximum and the gap certificate.

    The gap is ``max - second distinct max``; +inf when every value ties.
    """
    best = float(values.max())
    tol = TIE_RTOL * float(np.abs(values).max())
    tied = values >= best - tol
    index = lattice.lex_smallest(np.flatnonzero(tied))
    rest = values[~tied]
    gap = best - float(rest.max()) if rest.size else math.inf
    return index, best, gap


def argmax_H(
    problem: ControlProblem,
    x: Sequence[float],
    t: float,
    lam: float,
    psi: Sequence[float],
) -> ArgmaxResult:
    values = hamiltonian_values(problem, x, t, lam, psi)
    index, best, gap = select_max(problem.lattice, values)
    return ArgmaxResult(problem.lattice.points[index].copy(), best, gap)


def penalty_values(points: np.ndarray, t: float, u_ref: Sequence[float], n: int) -> np.ndarray:
    """``(1/n) e^{-t} |p - u_ref|`` for every row ``p`` of ``points``."""
    if n < 1:
        raise ValueError(f"penalty index n must be >= 1, got {n}")
    dist = np.linalg.norm(np.atleast_2d(points) - _vec(u_ref), axis=1)
    return math.exp(-t) * dist / n


def argmax_H_penalized(
    problem: ControlProblem,
    x: Sequence[float],
    t: float,
    lam: float,
    psi: Sequence[float],
    u_ref: Sequence[float],
    n: int,
) -> ArgmaxResult:
    pts = problem.lattice.points
    values = hamiltonian_values(problem, x, t, lam, psi) - penalty_values(pts, t, u_ref, n)
    index, best, gap = select_max(problem.lattice, values)
    return ArgmaxResult(pts[index].copy(), best, gap)


__all__ = [
    "ArgmaxResult",
    "Multiplier",
    "argmax_H",
    "argmax_H_penalized",
    "eval_H",
    "grad_x_H",
    "hamiltonian_values",
    "penalty_values",
    "select_max",
]
