"""
Control problems, control sets and numeric checks of the standing conditions.

A problem is ``x' = f(t, x, u)``, ``x(0) = x0``, ``u in P`` with payoff
``J(u) = integral of g(t, x, u)`` to be maximized. ``f`` and ``g`` must be
continuously differentiable in ``x``; their exact x-derivatives are supplied
by the caller.

Batch contract: with ``vectorized=True`` (the default) ``f``/``g`` also accept
a batch of controls of shape ``(n, p)`` and return ``(n, m)`` / ``(n,)``.
Set ``vectorized=False`` for plain per-control callables.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from functools import cached_property
from typing import Callable, List, Optional, Sequence, Tuple, Union

import numpy as np

from .constants import (
    DEFAULT_GRID_1D,
    DEFAULT_GRID_2D,
    FD_RTOL,
    FD_STEP,
    N_JACOBIAN_POINTS,
    TAIL_ATOL,
    TAIL_RTOL,
)
from .errors import IntegrationError
from .odeint import ControlSignal, integrate_forward

VectorFn = Callable[[float, np.ndarray, np.ndarray], np.ndarray]
ScalarFn = Callable[[float, np.ndarray, np.ndarray], "np.ndarray | float"]
# g(t, t_cell, x, u): the payoff at t on the cell that starts at t_cell
CellPayoffFn = Callable[[float, float, np.ndarray, np.ndarray], "np.ndarray | float"]


def default_grid(control_dim: int) -> int:
    return DEFAULT_GRID_1D if control_dim == 1 else DEFAULT_GRID_2D


@dataclass(frozen=True)
class FiniteSet:
    """Finite control set, kept in stored order."""

    points: Tuple[Tuple[float, ...], ...]

    def __init__(self, points: Sequence[Sequence[float]]):
        rows = tuple(tuple(float(c) for c in np.atleast_1d(p)) for p in points)
        object.__setattr__(self, "points", rows)

    @property
    def dim(self) -> int:
        return len(self.points[0]) if self.points else 0

    def issues(self) -> List[str]:
        if not self.points:
            return ["finite control set is empty"]
        if len({len(p) for p in self.points}) != 1:
            return ["finite control set mixes vector lengths"]
        return []

    def lattice_points(self) -> np.ndarray:
        return np.array(self.points, dtype=float).reshape(len(self.points), -1)

    def contains(self, u: Sequence[float], atol: float = 1e-12) -> bool:
        u = np.atleast_1d(np.asarray(u, dtype=float))
        return any(np.allclose(u, p, rtol=0.0, atol=atol) for p in self.points)


@dataclass(frozen=True)
class Box:
    """Axis-aligned box discretized by a uniform lattice for argmax searches."""

    lower: Tuple[float, ...]
    upper: Tuple[float, ...]
    grid_per_axis: int

    def __init__(self, lower: Sequence[float], upper: Sequence[float], grid_per_axis: Optional[int] = None):
        lo = tuple(float(c) for c in np.atleast_1d(lower))
        hi = tuple(float(c) for c in np.atleast_1d(upper))
        object.__setattr__(self, "lower", lo)
        object.__setattr__(self, "upper", hi)
        object.__setattr__(
            self, "grid_per_axis", int(grid_per_axis) if grid_per_axis else default_grid(len(lo))
        )

    @property
    def dim(self) -> int:
        return len(self.lower)

    def issues(self) -> List[str]:
        out = []
        if len(self.lower) != len(self.upper) or not self.lower:
            out.append("box bounds have mismatched or zero length")
            return out
        for i, (lo, hi) in enumerate(zip(self.lower, self.upper)):
            if not (math.isfinite(lo) and math.isfinite(hi)):
                out.append(f"box axis {i} is unbounded")
            elif lo > hi:
                out.append(f"box axis {i} has lower={lo} > upper={hi}")
        if self.grid_per_axis < 1:
            out.append("grid_per_axis must be positive")
        return out

    def lattice_points(self) -> np.ndarray:
        axes = [np.linspace(lo, hi, self.grid_per_axis) for lo, hi in zip(self.lower, self.upper)]
        mesh = np.meshgrid(*axes, indexing="ij")
        return np.stack([m.ravel() for m in mesh], axis=1)

    def spacing(self) -> np.ndarray:
        n = max(self.grid_per_axis - 1, 1)
        return (np.asarray(self.upper) - np.asarray(self.lower)) / n

    def contains(self, u: Sequence[float], atol: float = 1e-12) -> bool:
        u = np.atleast_1d(np.asarray(u, dtype=float))
        return bool(np.all(u >= np.asarray(self.lower) - atol) and np.all(u <= np.asarray(self.upper) + atol))


ControlSet = Union[FiniteSet, Box]


def control_set_points(control_set: ControlSet) -> np.ndarray:
    """Discretization of P: stored order for FiniteSet, lexicographic lattice for Box."""
    return control_set.lattice_points()


class ControlLattice:
    """Lattice of P with nearest-point projection and lexicographic tie-breaks."""

    def __init__(self, control_set: ControlSet):
        self.control_set = control_set
        self.points = control_set_points(control_set)
        self.points.setflags(write=False)
        order = np.lexsort(self.points.T[::-1])
        self.lex_rank = np.empty(len(self.points), dtype=int)
        self.lex_rank[order] = np.arange(len(self.points))
        self.first = int(order[0])

    def __len__(self) -> int:
        return len(self.points)

    def lex_smallest(self, candidates: np.ndarray) -> int:
        """Lexicographically smallest point among candidate indices."""
        return int(candidates[np.argmin(self.lex_rank[candidates])])

    def diameter(self) -> float:
        lo, hi = self.points.min(axis=0), self.points.max(axis=0)
        return float(np.linalg.norm(hi - lo))

    def nearest(self, values: np.ndarray, prefer: Optional[np.ndarray] = None) -> np.ndarray:
        """
        Index of the nearest lattice point to every row of ``values``.

        Ties go to ``prefer[i]`` when it is among the nearest, otherwise to the
        lexicographically smallest nearest point.
        """
        values = np.atleast_2d(np.asarray(values, dtype=float))
        d2 = ((values[:, None, :] - self.points[None, :, :]) ** 2).sum(axis=2)
        best = d2.min(axis=1)
        scale = 1e-12 * max(1.0, float(np.abs(self.points).max(initial=0.0))) ** 2
        out = np.empty(len(values), dtype=int)
        for i in range(len(values)):
            ties = np.flatnonzero(d2[i] <= best[i] + scale)
            if prefer is not None and prefer[i] in ties:
                out[i] = prefer[i]
            else:
                out[i] = self.lex_smallest(ties)
        return out


@dataclass(frozen=True)
class Diagnostic:
    """One failed finite check, with where and how badly."""

    check: str
    location: str
    magnitude: float
    message: str


@dataclass(frozen=True, eq=False)
class ControlProblem:
    """Dynamics, payoff, control set and initial state."""

    state_dim: int
    control_dim: int
    x0: np.ndarray
    dynamics: VectorFn
    dynamics_jac_x: Callable[[float, np.ndarray, np.ndarray], np.ndarray]
    payoff: ScalarFn
    payoff_grad_x: VectorFn
    control_set: ControlSet
    label: str = "problem"
    vectorized: bool = True
    # Set when g also depends on which cell t belongs to (node times close
    # one cell and open the next)
    cell_payoff: Optional[CellPayoffFn] = None

    def __post_init__(self) -> None:
        x0 = np.atleast_1d(np.array(self.x0, dtype=float))
        x0.setflags(write=False)
        object.__setattr__(self, "x0", x0)

    @cached_property
    def lattice(self) -> ControlLattice:
        return ControlLattice(self.control_set)

    # Evaluation wrappers; ``u`` may be (p,) or (n, p).
    def f(self, t: float, x: np.ndarray, u: np.ndarray) -> np.ndarray:
        u = np.asarray(u, dtype=float)
        if u.ndim == 2 and not self.vectorized:
            return np.stack([np.asarray(self.dynamics(t, x, row), dtype=float) for row in u])
        return np.asarray(self.dynamics(t, x, u), dtype=float)

    def g(self, t: float, x: np.ndarray, u: np.ndarray) -> "np.ndarray | float":
        u = np.asarray(u, dtype=float)
        if u.ndim == 2 and not self.vectorized:
            return np.array([float(self.payoff(t, x, row)) for row in u])
        out = np.asarray(self.payoff(t, x, u), dtype=float)
        return out if u.ndim == 2 else out.item()

    def g_on_cell(self, t: float, t_cell: float, x: np.ndarray, u: np.ndarray) -> "np.ndarray | float":
        """``g`` at ``t`` read on the cell that starts at ``t_cell``."""
        if self.cell_payoff is None:
            return self.g(t, x, u)
        u = np.asarray(u, dtype=float)
        if u.ndim == 2 and not self.vectorized:
            return np.array([float(self.cell_payoff(t, t_cell, x, row)) for row in u])
        out = np.asarray(self.cell_payoff(t, t_cell, x, u), dtype=float)
        return out if u.ndim == 2 else out.item()

    def jac_x(self, t: float, x: np.ndarray, u: np.ndarray) -> np.ndarray:
        return np.asarray(self.dynamics_jac_x(t, x, np.asarray(u, dtype=float)), dtype=float).reshape(
            self.state_dim, self.state_dim
        )

    def grad_g(self, t: float, x: np.ndarray, u: np.ndarray) -> np.ndarray:
        return np.asarray(self.payoff_grad_x(t, x, np.asarray(u, dtype=float)), dtype=float).reshape(
            self.state_dim
        )

    def with_payoff(self, payoff: ScalarFn, payoff_grad_x: VectorFn, label: Optional[str] = None) -> "ControlProblem":
        return replace(
            self, payoff=payoff, payoff_grad_x=payoff_grad_x, cell_payoff=None, label=label or self.label
        )

    def with_control_set(self, control_set: ControlSet) -> "ControlProblem":
        return replace(self, control_set=control_set)

    def with_x0(self, x0: Sequence[float]) -> "ControlProblem":
        return replace(self, x0=np.atleast_1d(np.asarray(x0, dtype=float)))


def zero_payoff(problem: ControlProblem) -> ControlProblem:
    """Same dynamics and control set with g identically zero."""
    m = problem.state_dim

    def payoff(t: float, x: np.ndarray, u: np.ndarray) -> "np.ndarray | float":
        u = np.asarray(u)
        return np.zeros(u.shape[0]) if u.ndim == 2 else 0.0

    return problem.with_payoff(payoff, lambda t, x, u: np.zeros(m), label=f"{problem.label}-zero")


@dataclass(frozen=True)
class TailBoundReport:
    """Numeric estimate of the tail function for one control."""

    sample_times: List[float]
    tail_integrals: List[float]
    fitted_decay_rate: Optional[float]
    satisfied: bool
    tolerance: float


@dataclass(frozen=True)
class ConvexityReport:
    """Outcome of the vectogram sampler; ``witness`` is ``(u1, u2, theta)`` on failure."""

    passed: bool
    n_checked: int
    witness: Optional[Tuple[np.ndarray, np.ndarray, float]] = None

    def __bool__(self) -> bool:
        return self.passed


def _benign_points(problem: ControlProblem, n: int, rng: np.random.Generator) -> List[Tuple[float, np.ndarray, np.ndarray]]:
    pts = problem.lattice.points
    radius = 0.25 * max(float(np.abs(problem.x0).max(initial=0.0)), 1.0)
    out = []
    for _ in range(n):
        t = float(rng.uniform(0.0, 5.0))
        x = problem.x0 + rng.uniform(-radius, radius, size=problem.state_dim)
        u = pts[int(rng.integers(len(pts)))]
        out.append((t, x, u))
    return out


def finite_difference_jacobian(fn: Callable[[np.ndarray], np.ndarray], x: np.ndarray, step: float = FD_STEP) -> np.ndarray:
    """Central differences; column j is d fn / d x_j."""
    x = np.asarray(x, dtype=float)
    cols = []
    for j in range(x.size):
        e = np.zeros_like(x)
        e[j] = step
        cols.append((np.atleast_1d(fn(x + e)) - np.atleast_1d(fn(x - e))) / (2.0 * step))
    return np.stack(cols, axis=-1)


def relative_error(approx: np.ndarray, exact: np.ndarray) -> float:
    """Error relative to ``max(1, |exact|)`` so zero derivatives compare absolutely."""
    diff = float(np.max(np.abs(np.asarray(approx) - np.asarray(exact)), initial=0.0))
    return diff / max(1.0, float(np.max(np.abs(exact), initial=0.0)))


class _WorstCase:
    """Keeps the worst failing point of one named check."""

    def __init__(self, check: str, message: str):
        self.check = check
        self.message = message
        self.location: Optional[str] = None
        self.magnitude = -math.inf

    def record(self, location: str, magnitude: float) -> None:
        if magnitude > self.magnitude or math.isnan(magnitude):
            self.location, self.magnitude = location, magnitude

    def diagnostic(self) -> Optional[Diagnostic]:
        if self.location is None:
            return None
        return Diagnostic(self.check, self.location, self.magnitude, self.message)


def validate_problem(problem: ControlProblem, n_points: int = N_JACOBIAN_POINTS, seed: int = 0) -> List[Diagnostic]:
    """
    Finite checks of smoothness, totality and control-set invariants.

    One diagnostic per failed check, located at its worst point.
    """
    diagnostics: List[Diagnostic] = []
    for issue in problem.control_set.issues():
        diagnostics.append(Diagnostic("control_set", "P", 1.0, issue))
    if problem.control_set.dim != problem.control_dim:
        diagnostics.append(
            Diagnostic("control_set", "P", float(problem.control_set.dim), "control set dimension differs from control_dim")
        )
    if problem.x0.size != problem.state_dim:
        diagnostics.append(Diagnostic("x0", "x0", float(problem.x0.size), "x0 length differs from state_dim"))
    if diagnostics:
        return diagnostics

    jacobian = _WorstCase("jacobian", "dynamics_jac_x disagrees with finite differences")
    gradient = _WorstCase("payoff_gradient", "payoff_grad_x disagrees with finite differences")
    evaluation = _WorstCase("evaluation", "f/g raised or returned a non-finite or misshaped value")

    rng = np.random.default_rng(seed)
    for t, x, u in _benign_points(problem, n_points, rng):
        where = f"t={t:.4g}, x={np.round(x, 6).tolist()}, u={u.tolist()}"
        try:
            jac = problem.jac_x(t, x, u)
            fd = finite_difference_jacobian(lambda y, t=t, u=u: problem.f(t, y, u), x).reshape(jac.shape)
            err = relative_error(fd, jac)
            if not err <= FD_RTOL:
                jacobian.record(where, err)
            grad = problem.grad_g(t, x, u)
            fd_g = finite_difference_jacobian(lambda y, t=t, u=u: np.array([problem.g(t, y, u)]), x).reshape(grad.shape)
            err = relative_error(fd_g, grad)
            if not err <= FD_RTOL:
                gradient.record(where, err)
        except Exception:  # noqa: BLE001 - any failure is a diagnostic
            evaluation.record(where, math.inf)

    # Coarse (t, x, u) lattice: f and g must be finite everywhere on it
    radius = 0.25 * max(float(np.abs(problem.x0).max(initial=0.0)), 1.0)
    for t in (0.0, 1.0, 10.0):
        for shift in (-radius, 0.0, radius):
            x = problem.x0 + shift
            for u in problem.lattice.points[:: max(1, len(problem.lattice) // 5)]:
                where = f"t={t}, x={x.tolist()}, u={u.tolist()}"
                try:
                    fx = problem.f(t, x, u)
                    gx = problem.g(t, x, u)
                    ok = fx.shape == (problem.state_dim,) and bool(np.all(np.isfinite(fx))) and math.isfinite(gx)
                except Exception:  # noqa: BLE001
                    ok = False
                if not ok:
                    evaluation.record(where, math.inf)

    for case in (jacobian, gradient, evaluation):
        diag = case.diagnostic()
        if diag is not None:
            diagnostics.append(diag)
    return diagnostics


def _cumulative_abs_payoff(problem: ControlProblem, control: ControlSignal) -> Tuple[np.ndarray, np.ndarray]:
    grid = control.grid
    x = integrate_forward(lambda t, y, u: problem.f(t, y, u), problem.x0, grid, params=list(control.values))
    nodes = grid.nodes
    h = grid.h
    cum = np.zeros(grid.n_nodes)
    for k in range(grid.n_steps):
        u = control.values[k]
        left = abs(problem.g_on_cell(nodes[k], nodes[k], x.values[k], u))
        right = abs(problem.g_on_cell(nodes[k + 1], nodes[k], x.values[k + 1], u))
        cum[k + 1] = cum[k] + 0.5 * h * (left + right)
    return nodes, cum


def estimate_tail_bound(
    problem: ControlProblem,
    control: ControlSignal,
    horizon: float,
    sample_times: Sequence[float],
) -> TailBoundReport:
    """
    Quadrature of ``integral_T^{T_max} |g| dt`` at each sample time.

    Satisfied iff the tails are non-increasing and the last one is below
    ``max(TAIL_RTOL * first, TAIL_ATOL)``.
    """
    times = [float(s) for s in sample_times]
    if any(b <= a for a, b in zip(times, times[1:])):
        raise ValueError("sample_times must be strictly increasing")
    if times and times[-1] >= horizon:
        raise ValueError("sample times must stay below the horizon")
    if control.grid.t1 < horizon - 1e-12:
        raise ValueError("control grid does not reach the horizon")
    try:
        nodes, cum = _cumulative_abs_payoff(problem, control)
    except IntegrationError as exc:
        raise IntegrationError(exc.index, exc.time, "state (blow-up)") from exc
    total = float(np.interp(horizon, nodes, cum))
    tails = [max(total - float(np.interp(s, nodes, cum)), 0.0) for s in times]
    tolerance = max(TAIL_RTOL * tails[0], TAIL_ATOL) if tails else TAIL_ATOL
    monotone = all(b <= a for a, b in zip(tails, tails[1:]))
    satisfied = bool(monotone and (not tails or tails[-1] <= tolerance))

    rate = None
    positive = [(s, v) for s, v in zip(times, tails) if v > 0.0]
    if len(positive) >= 2:
        ts, vs = zip(*positive)
        slope = np.polyfit(np.asarray(ts), np.log(np.asarray(vs)), 1)[0]
        rate = float(-slope)
    return TailBoundReport(times, tails, rate, satisfied, tolerance)


def check_vectogram_convexity(
    problem: ControlProblem,
    t: float,
    x: Sequence[float],
    n_samples: int,
    tol: float,
    seed: int = 0,
) -> ConvexityReport:
    """
    Sampling falsifier for convexity of ``{(z, f(t, x, u)) : z <= g(t, x, u)}``.

    Each sampled ``(u1, u2, theta)`` needs a witness u in P whose velocity is
    within ``tol`` of the mixed velocity and whose payoff is at least the mixed
    payoff minus ``tol``. For a Box the mixed control itself is a candidate, as
    it lies in P. Mid-point mixtures are checked first.
    """
    if n_samples < 2:
        raise ValueError("n_samples must be at least 2")
    x = np.atleast_1d(np.asarray(x, dtype=float))
    pts = problem.lattice.points
    velocities = problem.f(t, x, pts)
    payoffs = np.asarray(problem.g(t, x, pts), dtype=float)
    n = len(pts)
    rng = np.random.default_rng(seed)

    pairs = [(i, j) for i in range(n) for j in range(i + 1, n)]
    combos: List[Tuple[int, int, float]] = [(i, j, 0.5) for i, j in pairs[:n_samples]]
    while pairs and len(combos) < n_samples:
        i, j = pairs[int(rng.integers(len(pairs)))]
        combos.append((i, j, float(rng.uniform(0.0, 1.0))))

    is_box = isinstance(problem.control_set, Box)
    for i, j, theta in combos:
        target_v = theta * velocities[i] + (1.0 - theta) * velocities[j]
        target_g = theta * payoffs[i] + (1.0 - theta) * payoffs[j]
        cand_v, cand_g = velocities, payoffs
        if is_box:
            mix = theta * pts[i] + (1.0 - theta) * pts[j]
            cand_v = np.vstack([velocities, problem.f(t, x, mix[None, :])])
            cand_g = np.append(payoffs, problem.g(t, x, mix[None, :]))
        close = np.linalg.norm(cand_v - target_v, axis=1) <= tol
        if not np.any(close & (cand_g >= target_g - tol)):
            return ConvexityReport(False, len(combos), (pts[i].copy(), pts[j].copy(), theta))
    return ConvexityReport(True, len(combos))


__all__ = [
    "Box",
    "ControlLattice",
    "ControlProblem",
    "ControlSet",
    "ConvexityReport",
    "Diagnostic",
    "FiniteSet",
    "TailBoundReport",
    "check_vectogram_convexity",
    "control_set_points",
    "estimate_tail_bound",
    "finite_difference_jacobian",
    "relative_error",
    "validate_problem",
    "zero_payoff",
]
