"""
Increasing-horizon truncation sweeps and the diagnostics read off them.

Each truncation [0, tau_n] is solved with psi(tau_n) = 0. A limit is
certified by a Cauchy test on the common window [0, tau_1]: the distances
from the largest-horizon adjoint to each earlier one must be non-increasing
and the last of them must fall below ``cauchy_tol``.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from typing import TYPE_CHECKING, Callable, List, Optional, Sequence, Tuple

import numpy as np

from .constants import MONOTONE_SLACK
from .errors import ConfigError, IntegrationError, NoCertifiedLimitError, RangeError, SweepAbortedError
from .odeint import ControlSignal, TimeGrid, sample
from .pmp_finite import (
    Extremal,
    ExtremalResiduals,
    SolveOptions,
    integrate_coupled,
    solve_fixed_endpoint,
    solve_free_endpoint,
)
from .problem_model import ControlProblem

if TYPE_CHECKING:
    from .logger import StructuredLogger


@dataclass(frozen=True)
class HorizonSchedule:
    horizons: Tuple[float, ...]

    def __post_init__(self) -> None:
        horizons = tuple(float(h) for h in self.horizons)
        if len(horizons) < 2:
            raise ConfigError(f"a horizon schedule needs at least two horizons, got {len(horizons)}")
        if not all(math.isfinite(h) and h > 0.0 for h in horizons):
            raise ConfigError("horizons must be finite and positive")
        if any(b <= a for a, b in zip(horizons, horizons[1:])):
            raise ConfigError(f"horizons must be strictly increasing: {list(horizons)}")
        object.__setattr__(self, "horizons", horizons)

    def __len__(self) -> int:
        return len(self.horizons)

    @property
    def first(self) -> float:
        return self.horizons[0]

    @property
    def last(self) -> float:
        return self.horizons[-1]


def geometric_schedule(tau1: float, n: int) -> HorizonSchedule:
    """``tau_k = tau1 * 2**(k-1)`` for k = 1..n."""
    return HorizonSchedule(tuple(tau1 * 2.0 ** k for k in range(n)))


@dataclass(frozen=True)
class HorizonResult:
    horizon: float
    extremal: Extremal
    residuals: ExtremalResiduals


@dataclass(frozen=True, eq=False)
class TruncationReport:
    per_horizon: List[HorizonResult]
    cauchy_table: np.ndarray
    limit: Optional[Extremal]
    tail_psi_norms: List[float]
    product_residuals: List[float]
    payoff_sequence: List[float]
    sample_times: List[float] = field(default_factory=list)
    psi_norms: List[float] = field(default_factory=list)

    @property
    def certified(self) -> bool:
        return self.limit is not None

    @property
    def horizons(self) -> List[float]:
        return [r.horizon for r in self.per_horizon]

    @property
    def largest(self) -> Extremal:
        return self.per_horizon[-1].extremal

    def cauchy_to_last(self) -> List[float]:
        return [float(v) for v in self.cauchy_table[-1]] if self.per_horizon else []


@dataclass(frozen=True)
class StabilityProbeReport:
    probe_time: float
    delta: float
    horizon_T: float
    deviations: List[float]
    modulus: float


# -- diagnostics on a single extremal ----------------------------------------


def transversality_diagnostics(extremal: Extremal, sample_times: Sequence[float]) -> Tuple[List[float], List[float]]:
    """``|psi(t_i)|`` and ``|psi(t_i) . x(t_i)|`` at each sample time."""
    psi_norms: List[float] = []
    products: List[float] = []
    for t in sample_times:
        psi = sample(extremal.psi, float(t))
        x = sample(extremal.x, float(t))
        psi_norms.append(float(np.linalg.norm(psi)))
        products.append(abs(float(psi @ x)))
    return psi_norms, products


def probe_directions(dim: int, n_directions: int, seed: int = 0) -> np.ndarray:
    """Axis directions first, then normalized Gaussian draws from ``seed``."""
    if n_directions < 1:
        raise ValueError("n_directions must be positive")
    rng = np.random.default_rng(seed)
    rows = [np.eye(dim)[i] for i in range(min(dim, n_directions))]
    while len(rows) < n_directions:
        d = rng.standard_normal(dim)
        norm = float(np.linalg.norm(d))
        if norm > 0.0:
            rows.append(d / norm)
    return np.array(rows)


def probe_adjoint_stability(
    problem: ControlProblem,
    extremal: Extremal,
    t: float,
    delta: float,
    n_directions: int,
    seed: int = 0,
) -> StabilityProbeReport:
    """
    Empirical stability modulus of the adjoint after time ``t``.

    Both the base and the perturbed runs integrate (x, psi, u = argmax H)
    forward from the node at or after ``t``; the base starts from the
    extremal's own (x, psi) there, so ``delta = 0`` gives zero deviation. A
    perturbed run that blows up reports +inf. This is a measurement, not a
    check of any stability condition.
    """
    grid = extremal.grid
    if not grid.contains(t):
        raise RangeError(f"probe time {t} outside [0, {extremal.horizon}]")
    if delta < 0.0:
        raise ValueError("delta must be non-negative")
    k = grid.node_index(t)
    if k is None:
        k = min(int(math.ceil((t - grid.t0) / grid.h)), grid.n_steps)
    if k >= grid.n_steps:
        raise RangeError(f"probe time {t} leaves no step before the horizon")
    sub = TimeGrid(grid.node(k), grid.t1, grid.n_steps - k)
    x_k, psi_k = extremal.x.values[k], extremal.psi.values[k]
    lam = extremal.lam

    _, base, _ = integrate_coupled(problem, sub, x_k, psi_k, lam)
    deviations: List[float] = []
    for d in probe_directions(problem.state_dim, n_directions, seed):
        try:
            _, pert, _ = integrate_coupled(problem, sub, x_k, psi_k + delta * d, lam)
        except IntegrationError:
            deviations.append(math.inf)
            continue
        deviations.append(float(np.max(np.linalg.norm(pert.values - base.values, axis=1))))
    return StabilityProbeReport(float(t), float(delta), extremal.horizon, deviations, max(deviations))


# -- report assembly ---------------------------------------------------------


def cauchy_table(results: Sequence[HorizonResult], opts: SolveOptions) -> np.ndarray:
    """Sup-norm distances between adjoints on the common window [0, tau_1]."""
    n = len(results)
    if n == 0:
        return np.zeros((0, 0))
    times = opts.grid(results[0].horizon).nodes
    stacked = np.array([[sample(r.extremal.psi, float(t)) for t in times] for r in results])
    table = np.zeros((n, n))
    for i in range(n):
        for j in range(i + 1, n):
            dist = float(np.max(np.linalg.norm(stacked[i] - stacked[j], axis=1)))
            table[i, j] = table[j, i] = dist
    return table


def _certify(table: np.ndarray, tol: float) -> bool:
    if table.shape[0] < 2:
        return False
    row = table[-1, :-1]
    monotone = all(b <= a + MONOTONE_SLACK for a, b in zip(row, row[1:]))
    return bool(monotone and row[-1] < tol)


def build_report(
    results: List[HorizonResult],
    opts: SolveOptions,
    sample_times: Optional[Sequence[float]] = None,
) -> TruncationReport:
    """Cauchy table, certification and the transversality columns of a sweep."""
    table = cauchy_table(results, opts)
    payoffs = [r.extremal.payoff for r in results]
    if not results:
        return TruncationReport(results, table, None, [], [], payoffs)
    largest = results[-1].extremal
    tail, _ = transversality_diagnostics(largest, [r.horizon for r in results[:-1]])
    times = [r.horizon for r in results[:-1]] if sample_times is None else [float(s) for s in sample_times]
    psi_norms, products = transversality_diagnostics(largest, times)
    limit = largest if _certify(table, opts.cauchy_tol) else None
    return TruncationReport(
        per_horizon=results,
        cauchy_table=table,
        limit=limit,
        tail_psi_norms=tail,
        product_residuals=products,
        payoff_sequence=payoffs,
        sample_times=times,
        psi_norms=psi_norms,
    )


def _run_schedule(
    solve: Callable[[float, Optional[Extremal]], Extremal],
    schedule: HorizonSchedule,
    opts: SolveOptions,
    independent: bool,
    workers: int,
    sample_times: Optional[Sequence[float]],
    logger: Optional["StructuredLogger"],
) -> TruncationReport:
    results: List[HorizonResult] = []
    if independent:
        with ThreadPoolExecutor(max_workers=max(1, workers)) as pool:
            futures = [pool.submit(solve, tau, None) for tau in schedule.horizons]
            failure: Optional[IntegrationError] = None
            for tau, future in zip(schedule.horizons, futures):
                try:
                    ext = future.result()
                except IntegrationError as exc:
                    failure = failure or exc
                    continue
                if failure is None:
                    results.append(HorizonResult(tau, ext, ext.residual))
            if failure is not None:
                raise SweepAbortedError(
                    f"horizon {schedule.horizons[len(results)]:g} blew up: {failure}",
                    build_report(results, opts),
                ) from failure
    else:
        previous: Optional[Extremal] = None
        for tau in schedule.horizons:
            try:
                ext = solve(tau, previous)
            except IntegrationError as exc:
                if logger is not None:
                    logger.error("horizon", f"tau={tau:g} blew up: {exc}")
                raise SweepAbortedError(f"horizon {tau:g} blew up: {exc}", build_report(results, opts)) from exc
            results.append(HorizonResult(tau, ext, ext.residual))
            previous = ext
    report = build_report(results, opts, sample_times)
    if logger is not None:
        status = "certified" if report.certified else "not certified"
        logger.info("horizon", f"sweep over {list(schedule.horizons)}: limit {status}",
                    {"cauchy_to_last": report.cauchy_to_last()})
    return report


def run_truncation_sweep(
    problem: ControlProblem,
    schedule: HorizonSchedule,
    opts: Optional[SolveOptions] = None,
    independent: bool = False,
    workers: int = 1,
    sample_times: Optional[Sequence[float]] = None,
    logger: Optional["StructuredLogger"] = None,
) -> TruncationReport:
    """
    Free-endpoint solve on every horizon of ``schedule``.

    By default each horizon is warm-started from the previous control; with
    ``independent=True`` every horizon starts cold and the solves may run on
    ``workers`` threads.
    """
    opts = opts or SolveOptions()

    def solve(tau: float, previous: Optional[Extremal]) -> Extremal:
        warm = None if previous is None else previous.u
        return solve_free_endpoint(problem, tau, opts, warm_start=warm, logger=logger)

    return _run_schedule(solve, schedule, opts, independent, workers, sample_times, logger)


def run_fixed_endpoint_sweep(
    problem: ControlProblem,
    reference: Extremal,
    schedule: HorizonSchedule,
    opts: Optional[SolveOptions] = None,
    logger: Optional["StructuredLogger"] = None,
) -> TruncationReport:
    """Truncations with ``x(tau_n)`` pinned to the reference state at ``tau_n``."""
    opts = opts or SolveOptions()
    if schedule.last > reference.horizon + 1e-12:
        raise ConfigError("reference extremal does not cover the schedule")

    def solve(tau: float, previous: Optional[Extremal]) -> Extremal:
        guess = None
        if previous is not None and previous.lam > 0.0:
            guess = previous.psi.values[0] / previous.lam
        return solve_fixed_endpoint(problem, tau, sample(reference.x, tau), opts, psi0_guess=guess, logger=logger)

    return _run_schedule(solve, schedule, opts, False, 1, None, logger)


def extract_limit(report: TruncationReport) -> Extremal:
    if report.limit is None:
        raise NoCertifiedLimitError("truncation sweep did not certify a limit extremal")
    return report.limit


def fit_cauchy_decay(report: TruncationReport) -> Optional[float]:
    """
    Exponential rate of the last Cauchy row against the earlier horizons,
    ``d(N, j) ~ C exp(-rate * tau_j)``; None with fewer than two positive
    distances.
    """
    if len(report.per_horizon) < 3:
        return None
    row = report.cauchy_table[-1, :-1]
    pairs = [(tau, d) for tau, d in zip(report.horizons[:-1], row) if d > 0.0]
    if len(pairs) < 2:
        return None
    taus, dists = zip(*pairs)
    slope = np.polyfit(np.asarray(taus), np.log(np.asarray(dists)), 1)[0]
    return float(-slope)


# -- penalized scheme --------------------------------------------------------


def penalized_problem(problem: ControlProblem, u_ref: ControlSignal, n: int) -> ControlProblem:
    """
    Payoff ``g - (1/n) e^{-t} |u - u_ref(t)|``; dg/dx is unchanged.

    ``u_ref`` is read on the cell the control applies to: at a node that
    closes cell k the quadrature still compares against u_ref on cell k.
    """
    if n < 1:
        raise ValueError(f"penalty index n must be >= 1, got {n}")
    base_g = problem.payoff

    def on_cell(t: float, t_cell: float, x: np.ndarray, u: np.ndarray) -> "np.ndarray | float":
        u = np.asarray(u, dtype=float)
        pen = math.exp(-t) / n
        dist = np.linalg.norm(u - u_ref.at(t_cell), axis=-1)
        base = np.asarray(base_g(t, x, u), dtype=float)
        return base - pen * dist if u.ndim == 2 else float(base) - pen * float(dist)

    def payoff(t: float, x: np.ndarray, u: np.ndarray) -> "np.ndarray | float":
        return on_cell(t, t, x, u)

    penalized = problem.with_payoff(payoff, problem.payoff_grad_x, label=f"{problem.label}-pen{n}")
    return replace(penalized, cell_payoff=on_cell)


def run_penalized_sweep(
    problem: ControlProblem,
    u_ref: ControlSignal,
    n_list: Sequence[int],
    schedule: HorizonSchedule,
    opts: Optional[SolveOptions] = None,
    logger: Optional["StructuredLogger"] = None,
) -> List[TruncationReport]:
    """One truncation sweep per penalty index n."""
    if u_ref.grid.t1 < schedule.last - 1e-12:
        raise ConfigError(f"u_ref covers [0, {u_ref.grid.t1:g}] but the schedule reaches {schedule.last:g}")
    if not n_list or any(int(n) != n or n < 1 for n in n_list):
        raise ConfigError("penalty indices must be positive integers")
    reports = []
    for n in n_list:
        if logger is not None:
            logger.info("penalized", f"n={n}")
        reports.append(run_truncation_sweep(penalized_problem(problem, u_ref, int(n)), schedule, opts, logger=logger))
    return reports


__all__ = [
    "HorizonResult",
    "HorizonSchedule",
    "StabilityProbeReport",
    "TruncationReport",
    "build_report",
    "cauchy_table",
    "extract_limit",
    "fit_cauchy_decay",
    "geometric_schedule",
    "penalized_problem",
    "probe_adjoint_stability",
    "probe_directions",
    "run_fixed_endpoint_sweep",
    "run_penalized_sweep",
    "run_truncation_sweep",
    "transversality_diagnostics",
]
