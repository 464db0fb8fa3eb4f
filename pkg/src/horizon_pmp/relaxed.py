"""
Relaxed controls: per-cell finite mixtures over P.

A relaxed control holds, for every cell of its grid, a short list of atoms
``(u_i, w_i)`` with non-negative weights summing to one. At most
``state_dim + 2`` atoms are kept per cell. Dynamics and payoff are
averaged with those weights, and ``chattering`` realizes a mixture by fast
switching between ordinary controls.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import TYPE_CHECKING, Callable, List, Optional, Sequence, Tuple

import numpy as np

from .constants import WEIGHT_ATOL
from .hamiltonian import hamiltonian_values, select_max
from .odeint import ControlSignal, TimeGrid, Trajectory, hermite_sample, integrate_backward, integrate_forward
from .pmp_finite import SolveOptions
from .problem_model import ControlProblem, ControlSet

if TYPE_CHECKING:
    from .logger import StructuredLogger

Atom = Tuple[np.ndarray, float]

MAX_SUBSLICES = 1000


def _freeze_cell(cell: Sequence[Tuple[Sequence[float], float]]) -> Tuple[Atom, ...]:
    atoms = []
    for u, w in cell:
        vec = np.atleast_1d(np.array(u, dtype=float))
        vec.setflags(write=False)
        atoms.append((vec, float(w)))
    return tuple(atoms)


@dataclass(frozen=True, eq=False)
class RelaxedControl:
    grid: TimeGrid
    cells: Tuple[Tuple[Atom, ...], ...]
    state_dim: int = 1

    def __post_init__(self) -> None:
        cells = tuple(_freeze_cell(c) for c in self.cells)
        if len(cells) != self.grid.n_steps:
            raise ValueError(f"relaxed control has {len(cells)} cells for {self.grid.n_steps} steps")
        cap = self.max_atoms
        for k, cell in enumerate(cells):
            if not 1 <= len(cell) <= cap:
                raise ValueError(f"cell {k} has {len(cell)} atoms; allowed 1..{cap}")
            weights = np.array([w for _, w in cell])
            if np.any(weights < 0.0) or abs(weights.sum() - 1.0) > WEIGHT_ATOL:
                raise ValueError(f"cell {k} weights must be >= 0 and sum to 1, got {weights.tolist()}")
            if len({u.size for u, _ in cell}) != 1:
                raise ValueError(f"cell {k} mixes control lengths")
        object.__setattr__(self, "cells", cells)

    @property
    def max_atoms(self) -> int:
        return self.state_dim + 2

    @classmethod
    def single(cls, grid: TimeGrid, values: Sequence[Sequence[float]], state_dim: int = 1) -> "RelaxedControl":
        """One atom of weight 1 per cell."""
        return cls(grid, tuple(((u, 1.0),) for u in values), state_dim)

    @classmethod
    def from_ordinary(cls, signal: ControlSignal, state_dim: int = 1) -> "RelaxedControl":
        return cls.single(signal.grid, list(signal.values), state_dim)

    @classmethod
    def mixture(cls, grid: TimeGrid, atoms: Sequence[Tuple[Sequence[float], float]], state_dim: int = 1) -> "RelaxedControl":
        """The same atoms on every cell."""
        return cls(grid, tuple(tuple(atoms) for _ in range(grid.n_steps)), state_dim)

    def cell_arrays(self, k: int) -> Tuple[np.ndarray, np.ndarray]:
        cell = self.cells[k]
        return np.array([u for u, _ in cell]), np.array([w for _, w in cell])

    def check_admissible(self, control_set: ControlSet) -> None:
        for k, cell in enumerate(self.cells):
            for u, _ in cell:
                if not control_set.contains(u):
                    raise ValueError(f"cell {k} atom {u.tolist()} is outside the control set")

    def check_problem(self, problem: ControlProblem) -> None:
        """The atom cap was sized for ``problem`` and every atom lies in its P."""
        if self.state_dim != problem.state_dim:
            raise ValueError(
                f"relaxed control was built for state_dim {self.state_dim} but the problem has {problem.state_dim}"
            )
        self.check_admissible(problem.control_set)

    def refine(self, factor: int) -> "RelaxedControl":
        """Same mixtures on a grid with ``factor`` sub-cells per cell."""
        cells = tuple(cell for cell in self.cells for _ in range(int(factor)))
        return RelaxedControl(self.grid.refine(factor), cells, self.state_dim)


def relaxed_field(problem: ControlProblem, ctrl: RelaxedControl) -> Callable[..., np.ndarray]:
    """
    ``(t, x[, k]) -> sum_i w_i f(t, x, u_i)`` on cell ``k`` (by default the
    cell containing t, clamped to the last cell past the grid).
    """
    ctrl.check_problem(problem)
    arrays = [ctrl.cell_arrays(k) for k in range(ctrl.grid.n_steps)]

    def field(t: float, x: np.ndarray, k: Optional[int] = None) -> np.ndarray:
        pts, weights = arrays[ctrl.grid.cell_index(t) if k is None else k]
        return weights @ problem.f(t, x, pts)

    return field


def relaxed_trajectory(problem: ControlProblem, ctrl: RelaxedControl) -> Trajectory:
    field = relaxed_field(problem, ctrl)
    return integrate_forward(field, problem.x0, ctrl.grid, params=list(range(ctrl.grid.n_steps)))


def _mixed_payoff(
    problem: ControlProblem, t: float, t_cell: float, x: np.ndarray, pts: np.ndarray, weights: np.ndarray
) -> float:
    return float(weights @ np.asarray(problem.g_on_cell(t, t_cell, x, pts), dtype=float))


def relaxed_cost(problem: ControlProblem, ctrl: RelaxedControl, T: Optional[float] = None, refine: int = 1) -> float:
    """
    Payoff of the relaxed control up to ``T`` (a grid node; the whole grid
    by default). Each cell averages the two node values of ``sum w_i g``.
    ``refine`` splits every cell first, matching the quadrature of a
    chattered control on the same fine grid.
    """
    if refine > 1:
        ctrl = ctrl.refine(refine)
    grid = ctrl.grid
    n_cells = grid.n_steps
    if T is not None:
        k = grid.node_index(T)
        if k is None:
            raise ValueError(f"T={T} is not a node of the control grid")
        n_cells = k
    x = relaxed_trajectory(problem, ctrl)
    total = 0.0
    for k in range(n_cells):
        pts, weights = ctrl.cell_arrays(k)
        left = _mixed_payoff(problem, grid.node(k), grid.node(k), x.values[k], pts, weights)
        right = _mixed_payoff(problem, grid.node(k + 1), grid.node(k), x.values[k + 1], pts, weights)
        total += 0.5 * grid.h * (left + right)
    return total


def _subslice_counts(weights: Sequence[Sequence[float]]) -> Tuple[int, List[List[int]]]:
    """Common number of sub-slices and integer shares for every cell."""
    for r in range(1, MAX_SUBSLICES + 1):
        if all(abs(w * r - round(w * r)) <= 1e-9 for cell in weights for w in cell):
            return r, [[int(round(w * r)) for w in cell] for cell in weights]
    r = MAX_SUBSLICES
    shares = []
    for cell in weights:  # largest remainder
        raw = [w * r for w in cell]
        base = [int(math.floor(v)) for v in raw]
        short = r - sum(base)
        order = sorted(range(len(raw)), key=lambda i: (-(raw[i] - base[i]), i))
        for i in order[:short]:
            base[i] += 1
        shares.append(base)
    return r, shares


def chattering(ctrl: RelaxedControl, slices_per_cell: int) -> ControlSignal:
    """
    Ordinary control on a grid refined by ``N * R``: every cell is cut into
    N slices and each slice into R sub-slices handed to the atoms in stored
    order, in proportion to their weights. R is the smallest count up to
    1000 that makes all shares whole; otherwise 1000 with largest-remainder
    rounding. Zero-weight atoms never appear.
    """
    if slices_per_cell < 1:
        raise ValueError("slices_per_cell must be >= 1")
    weights = [[w for _, w in cell] for cell in ctrl.cells]
    r, shares = _subslice_counts(weights)
    rows = []
    for cell, share in zip(ctrl.cells, shares):
        pattern = [u for (u, _), count in zip(cell, share) for _ in range(count)]
        rows.extend(pattern * slices_per_cell)
    return ControlSignal(ctrl.grid.refine(slices_per_cell * r), np.array(rows))


def subslices_for(ctrl: RelaxedControl) -> int:
    return _subslice_counts([[w for _, w in cell] for cell in ctrl.cells])[0]


def relaxed_maximality_gap(
    problem: ControlProblem,
    x: Trajectory,
    ctrl: RelaxedControl,
    lam: float,
    psi: Trajectory,
) -> float:
    """Largest ``sup_p H - sum_i w_i H(u_i)`` over cell start nodes."""
    ctrl.check_problem(problem)
    grid = ctrl.grid
    worst = 0.0
    for k in range(grid.n_steps):
        t = grid.node(k)
        best = float(hamiltonian_values(problem, x.values[k], t, lam, psi.values[k]).max())
        pts, weights = ctrl.cell_arrays(k)
        mixed = float(weights @ hamiltonian_values(problem, x.values[k], t, lam, psi.values[k], pts))
        worst = max(worst, best - mixed)
    return worst


@dataclass(frozen=True, eq=False)
class RelaxedExtremal:
    x: Trajectory
    control: RelaxedControl
    psi: Trajectory
    lam: float
    horizon: float
    max_gap: float
    converged: bool
    iterations: int
    payoff: float


def _weights_to_control(problem: ControlProblem, grid: TimeGrid, weights: np.ndarray) -> RelaxedControl:
    """Keep the ``m + 2`` heaviest atoms of each cell, renormalized."""
    points = problem.lattice.points
    cap = problem.state_dim + 2
    cells = []
    for row in weights:
        order = np.argsort(-row, kind="stable")[:cap]
        order = order[row[order] > 0.0]
        order = np.sort(order)
        kept = row[order] / row[order].sum()
        cells.append(tuple((points[i], float(w)) for i, w in zip(order, kept)))
    return RelaxedControl(grid, tuple(cells), problem.state_dim)


def solve_relaxed_free_endpoint(
    problem: ControlProblem,
    T: float,
    opts: Optional[SolveOptions] = None,
    logger: Optional["StructuredLogger"] = None,
) -> RelaxedExtremal:
    """
    Conditional-gradient sweep over per-cell lattice weights with psi(T) = 0.

    Each iteration moves the weights toward the H maximizer at every node,
    ``w <- (1 - g) w + g e_argmax`` with ``g = 2 / (k + 2)``. The adjoint is
    driven by the weight-averaged x-gradient of H. Stops when the relaxed
    maximality gap is within ``tol_gap * max(|J|, 1)``; otherwise returns the
    iterate with the best payoff, flagged.
    """
    opts = opts or SolveOptions()
    grid = opts.grid(T)
    points = problem.lattice.points
    n, L = grid.n_steps, len(points)
    weights = np.zeros((n, L))
    weights[:, problem.lattice.first] = 1.0

    def state(w: np.ndarray) -> Trajectory:
        def field(t: float, y: np.ndarray, k: int) -> np.ndarray:
            return w[k] @ problem.f(t, y, points)

        return integrate_forward(field, problem.x0, grid, params=list(range(n)))

    def adjoint(w: np.ndarray, x: Trajectory) -> Trajectory:
        derivs = np.empty((n, 2, problem.state_dim))
        for k in range(n):
            derivs[k, 0] = w[k] @ problem.f(grid.node(k), x.values[k], points)
            derivs[k, 1] = w[k] @ problem.f(grid.node(k + 1), x.values[k + 1], points)

        def field(t: float, psi: np.ndarray, k: int) -> np.ndarray:
            xt = hermite_sample(x, derivs, t, cell=k)
            grad = np.zeros(problem.state_dim)
            for i in np.flatnonzero(w[k]):
                u = points[i]
                grad += w[k, i] * (problem.jac_x(t, xt, u).T @ psi + problem.grad_g(t, xt, u))
            return -grad

        return integrate_backward(field, np.zeros(problem.state_dim), grid, params=list(range(n)))

    def cost(w: np.ndarray, x: Trajectory) -> float:
        total = 0.0
        for k in range(n):
            t_cell = grid.node(k)
            left = w[k] @ np.asarray(problem.g_on_cell(t_cell, t_cell, x.values[k], points), dtype=float)
            right = w[k] @ np.asarray(problem.g_on_cell(grid.node(k + 1), t_cell, x.values[k + 1], points), dtype=float)
            total += 0.5 * grid.h * (left + right)
        return float(total)

    best: Optional[Tuple[float, float, np.ndarray, Trajectory, Trajectory]] = None
    converged = False
    iterations = 0
    for it in range(int(opts.max_iters)):
        iterations = it + 1
        x = state(weights)
        psi = adjoint(weights, x)
        J = cost(weights, x)
        gap = 0.0
        target = np.empty(n, dtype=int)
        for k in range(n):
            values = hamiltonian_values(problem, x.values[k], grid.node(k), 1.0, psi.values[k])
            target[k], top, _ = select_max(problem.lattice, values)
            gap = max(gap, top - float(weights[k] @ values))
        if best is None or J > best[0]:
            best = (J, gap, weights.copy(), x, psi)
        if logger is not None:
            logger.debug("relaxed", f"T={T:g} it={iterations} gap={gap:.3e} J={J:.9g}")
        if gap <= opts.tol_gap * max(abs(J), 1.0):
            best = (J, gap, weights.copy(), x, psi)
            converged = True
            break
        step = 2.0 / (it + 2.0)
        weights *= 1.0 - step
        weights[np.arange(n), target] += step

    assert best is not None
    _, gap, w, _, psi = best
    ctrl = _weights_to_control(problem, grid, w)
    x = relaxed_trajectory(problem, ctrl)
    J = relaxed_cost(problem, ctrl)
    scale = 1.0 / math.sqrt(1.0 + float(psi.values[0] @ psi.values[0]))
    if logger is not None:
        level = "INFO" if converged else "WARN"
        logger.log(level, "relaxed", f"T={T:g} J={J:.9g} gap={gap:.3e} after {iterations} iterations")
    return RelaxedExtremal(
        x=x,
        control=ctrl,
        psi=psi.scaled(scale),
        lam=scale,
        horizon=float(T),
        max_gap=gap * scale,
        converged=converged,
        iterations=iterations,
        payoff=J,
    )


__all__ = [
    "RelaxedControl",
    "RelaxedExtremal",
    "chattering",
    "relaxed_cost",
    "relaxed_field",
    "relaxed_maximality_gap",
    "relaxed_trajectory",
    "solve_relaxed_free_endpoint",
    "subslices_for",
]
