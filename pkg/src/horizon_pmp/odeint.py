"""
Fixed-step RK4 integration and the grid/arc data model shared by all solvers.

Arcs live on uniform grids. Controls are piecewise constant on left-closed
cells ``[t_k, t_{k+1})``; integrators accept a per-step parameter sequence so
every RK4 stage of step ``k`` sees the value attached to cell ``k`` (the
control is never looked up from the stage time, which would leak the next
cell's value into the last stage).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Any, Callable, Optional, Sequence

import numpy as np

from .constants import NODE_ATOL
from .errors import IntegrationError, RangeError

Field = Callable[..., np.ndarray]


@dataclass(frozen=True)
class TimeGrid:
    """Uniform grid ``t0 + k*h`` with ``n_steps + 1`` nodes."""

    t0: float
    t1: float
    n_steps: int

    def __post_init__(self) -> None:
        if not (math.isfinite(self.t0) and math.isfinite(self.t1)):
            raise ValueError("grid endpoints must be finite")
        if self.t1 <= self.t0:
            raise ValueError(f"grid needs t1 > t0, got [{self.t0}, {self.t1}]")
        if int(self.n_steps) != self.n_steps or self.n_steps < 1:
            raise ValueError(f"n_steps must be a positive integer, got {self.n_steps}")

    @classmethod
    def for_horizon(cls, horizon: float, steps_per_unit: int, t0: float = 0.0) -> "TimeGrid":
        """Grid on ``[t0, t0 + horizon]`` with ``steps_per_unit`` steps per unit time."""
        n_steps = max(1, int(round(horizon * steps_per_unit)))
        return cls(t0, t0 + horizon, n_steps)

    @property
    def h(self) -> float:
        return (self.t1 - self.t0) / self.n_steps

    @property
    def n_nodes(self) -> int:
        return self.n_steps + 1

    @property
    def nodes(self) -> np.ndarray:
        nodes = self.t0 + self.h * np.arange(self.n_nodes, dtype=float)
        nodes[-1] = self.t1
        return nodes

    def node(self, k: int) -> float:
        return self.t1 if k == self.n_steps else self.t0 + k * self.h

    def contains(self, t: float, slack: float = NODE_ATOL) -> bool:
        return self.t0 - slack <= t <= self.t1 + slack

    def node_index(self, t: float) -> Optional[int]:
        """Index of the node at ``t`` (within NODE_ATOL), or None."""
        k = int(round((t - self.t0) / self.h))
        if 0 <= k <= self.n_steps and abs(self.node(k) - t) <= NODE_ATOL * max(1.0, abs(t)):
            return k
        return None

    def cell_index(self, t: float) -> int:
        """Cell containing ``t``; nodes belong to the cell they open, t1 to the last cell."""
        k = self.node_index(t)
        if k is None:
            k = int(math.floor((t - self.t0) / self.h))
        return min(max(k, 0), self.n_steps - 1)

    def refine(self, factor: int) -> "TimeGrid":
        return TimeGrid(self.t0, self.t1, self.n_steps * int(factor))


@dataclass(frozen=True, eq=False)
class Trajectory:
    """Vector samples, one per grid node."""

    grid: TimeGrid
    values: np.ndarray

    def __post_init__(self) -> None:
        values = np.array(self.values, dtype=float)
        if values.ndim == 1:
            values = values[:, None]
        if values.shape[0] != self.grid.n_nodes:
            raise ValueError(
                f"trajectory has {values.shape[0]} samples for {self.grid.n_nodes} nodes"
            )
        if not np.all(np.isfinite(values)):
            bad = int(np.argmax(~np.all(np.isfinite(values), axis=1)))
            raise IntegrationError(bad, self.grid.node(bad), "sample")
        values.setflags(write=False)
        object.__setattr__(self, "values", values)

    @property
    def dim(self) -> int:
        return int(self.values.shape[1])

    @property
    def times(self) -> np.ndarray:
        return self.grid.nodes

    def final(self) -> np.ndarray:
        return self.values[-1].copy()

    def scaled(self, factor: float) -> "Trajectory":
        return Trajectory(self.grid, self.values * factor)


@dataclass(frozen=True, eq=False)
class ControlSignal:
    """Piecewise-constant control, one value per cell."""

    grid: TimeGrid
    values: np.ndarray

    def __post_init__(self) -> None:
        values = np.array(self.values, dtype=float)
        if values.ndim == 1:
            values = values[:, None]
        if values.shape[0] != self.grid.n_steps:
            raise ValueError(
                f"control has {values.shape[0]} cells for {self.grid.n_steps} steps"
            )
        values.setflags(write=False)
        object.__setattr__(self, "values", values)

    @classmethod
    def constant(cls, grid: TimeGrid, value: Sequence[float]) -> "ControlSignal":
        row = np.atleast_1d(np.asarray(value, dtype=float))
        return cls(grid, np.tile(row, (grid.n_steps, 1)))

    @property
    def dim(self) -> int:
        return int(self.values.shape[1])

    def at(self, t: float) -> np.ndarray:
        """Value on the cell containing ``t`` (clamped at both ends)."""
        return self.values[self.grid.cell_index(t)]

    def resample(self, grid: TimeGrid) -> "ControlSignal":
        """Read this control at the left node of every cell of ``grid``."""
        return ControlSignal(grid, np.array([self.at(grid.node(k)) for k in range(grid.n_steps)]))


def rk4_step(field: Field, t: float, h: float, y: np.ndarray, param: Any = None) -> np.ndarray:
    """One classical RK4 step of size ``h`` (negative ``h`` steps backward)."""
    if param is None:
        k1 = field(t, y)
        k2 = field(t + 0.5 * h, y + 0.5 * h * k1)
        k3 = field(t + 0.5 * h, y + 0.5 * h * k2)
        k4 = field(t + h, y + h * k3)
    else:
        k1 = field(t, y, param)
        k2 = field(t + 0.5 * h, y + 0.5 * h * k1, param)
        k3 = field(t + 0.5 * h, y + 0.5 * h * k2, param)
        k4 = field(t + h, y + h * k3, param)
    return y + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


def _check_params(params: Optional[Sequence[Any]], grid: TimeGrid) -> None:
    if params is not None and len(params) != grid.n_steps:
        raise ValueError(f"expected {grid.n_steps} step parameters, got {len(params)}")


def integrate_forward(
    field: Field,
    x_init: Sequence[float],
    grid: TimeGrid,
    params: Optional[Sequence[Any]] = None,
) -> Trajectory:
    """Integrate ``x' = field(t, x[, params[k]])`` from ``grid.t0``."""
    _check_params(params, grid)
    y = np.atleast_1d(np.asarray(x_init, dtype=float)).copy()
    if not np.all(np.isfinite(y)):
        raise IntegrationError(0, grid.t0)
    out = np.empty((grid.n_nodes, y.size))
    out[0] = y
    h = grid.h
    for k in range(grid.n_steps):
        y = rk4_step(field, grid.node(k), h, y, None if params is None else params[k])
        if not np.all(np.isfinite(y)):
            raise IntegrationError(k + 1, grid.node(k + 1))
        out[k + 1] = y
    return Trajectory(grid, out)


def integrate_backward(
    field: Field,
    y_terminal: Sequence[float],
    grid: TimeGrid,
    params: Optional[Sequence[Any]] = None,
) -> Trajectory:
    """Integrate ``y' = field(t, y[, params[k]])`` from ``grid.t1`` down to ``grid.t0``."""
    _check_params(params, grid)
    y = np.atleast_1d(np.asarray(y_terminal, dtype=float)).copy()
    if not np.all(np.isfinite(y)):
        raise IntegrationError(grid.n_steps, grid.t1, "terminal value")
    out = np.empty((grid.n_nodes, y.size))
    out[-1] = y
    h = grid.h
    for k in range(grid.n_steps - 1, -1, -1):
        y = rk4_step(field, grid.node(k + 1), -h, y, None if params is None else params[k])
        if not np.all(np.isfinite(y)):
            raise IntegrationError(k, grid.node(k))
        out[k] = y
    return Trajectory(grid, out)


def sample(traj: Trajectory, t: float) -> np.ndarray:
    """Linear interpolation between the bracketing nodes; exact at nodes."""
    grid = traj.grid
    if not grid.contains(t):
        raise RangeError(f"t={t} outside [{grid.t0}, {grid.t1}]")
    k = grid.node_index(t)
    if k is not None:
        return traj.values[k].copy()
    k = min(max(int(math.floor((t - grid.t0) / grid.h)), 0), grid.n_steps - 1)
    s = (t - grid.node(k)) / grid.h
    return (1.0 - s) * traj.values[k] + s * traj.values[k + 1]


def hermite_sample(traj: Trajectory, derivs: np.ndarray, t: float, cell: Optional[int] = None) -> np.ndarray:
    """
    Cubic Hermite interpolation on one cell.

    ``derivs`` has shape (n_steps, 2, d): the left and right end derivatives of
    each cell (one-sided, because the control jumps at nodes).
    """
    grid = traj.grid
    k = grid.cell_index(t) if cell is None else cell
    h = grid.h
    s = (t - grid.node(k)) / h
    s2, s3 = s * s, s * s * s
    h00 = 2.0 * s3 - 3.0 * s2 + 1.0
    h10 = s3 - 2.0 * s2 + s
    h01 = -2.0 * s3 + 3.0 * s2
    h11 = s3 - s2
    return (
        h00 * traj.values[k]
        + h10 * h * derivs[k, 0]
        + h01 * traj.values[k + 1]
        + h11 * h * derivs[k, 1]
    )


__all__ = [
    "ControlSignal",
    "TimeGrid",
    "Trajectory",
    "hermite_sample",
    "integrate_backward",
    "integrate_forward",
    "rk4_step",
    "sample",
]
