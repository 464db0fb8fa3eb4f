"""
CSV emission for every command.

All frames go through ``write_csv``: pandas with 17 significant digits, LF
line endings, no index column, written atomically. ``read_csv`` parses them
back at full precision.
"""

from __future__ import annotations

from io import StringIO
from pathlib import Path
from typing import List, NamedTuple, Sequence, Tuple

import numpy as np
import pandas as pd

from .constants import CSV_FLOAT_FORMAT
from .hamiltonian import hamiltonian_values, select_max
from .horizon_limits import StabilityProbeReport, TruncationReport
from .pmp_finite import Extremal
from .problem_model import ControlProblem
from .relaxed import RelaxedExtremal
from .utils import atomic_write_text


class TraceRow(NamedTuple):
    t: float
    x: Tuple[float, ...]
    u: Tuple[float, ...]
    psi: Tuple[float, ...]
    H: float
    gap: float


def trace_columns(state_dim: int, control_dim: int) -> List[str]:
    return (
        ["t"]
        + [f"x{i + 1}" for i in range(state_dim)]
        + [f"u{i + 1}" for i in range(control_dim)]
        + [f"psi{i + 1}" for i in range(state_dim)]
        + ["H", "gap"]
    )


def trace_rows(problem: ControlProblem, extremal: Extremal) -> List[TraceRow]:
    """
    One row per grid node. Node k carries the control of cell k; the final
    node repeats the last cell's control. ``gap`` is max H minus H at the
    applied control.
    """
    grid = extremal.grid
    lattice = problem.lattice
    applied = lattice.nearest(extremal.u.values)
    rows: List[TraceRow] = []
    for k in range(grid.n_nodes):
        t = grid.node(k)
        cell = min(k, grid.n_steps - 1)
        x = extremal.x.values[k]
        psi = extremal.psi.values[k]
        values = hamiltonian_values(problem, x, t, extremal.lam, psi)
        _, best, _ = select_max(lattice, values)
        here = float(values[applied[cell]])
        rows.append(
            TraceRow(
                t=t,
                x=tuple(float(v) for v in x),
                u=tuple(float(v) for v in extremal.u.values[cell]),
                psi=tuple(float(v) for v in psi),
                H=here,
                gap=max(best - here, 0.0),
            )
        )
    return rows


def trace_frame(problem: ControlProblem, extremal: Extremal) -> pd.DataFrame:
    rows = trace_rows(problem, extremal)
    data = [(r.t, *r.x, *r.u, *r.psi, r.H, r.gap) for r in rows]
    return pd.DataFrame(data, columns=trace_columns(problem.state_dim, problem.control_dim))


def relaxed_trace_frame(problem: ControlProblem, extremal: RelaxedExtremal) -> pd.DataFrame:
    """Per node: state, adjoint, the mean control of the cell mixture and its atom count."""
    grid = extremal.control.grid
    m, p = problem.state_dim, problem.control_dim
    data = []
    for k in range(grid.n_nodes):
        pts, weights = extremal.control.cell_arrays(min(k, grid.n_steps - 1))
        mean = weights @ pts
        data.append((grid.node(k), *extremal.x.values[k], *mean, *extremal.psi.values[k], len(weights)))
    columns = (
        ["t"]
        + [f"x{i + 1}" for i in range(m)]
        + [f"u_mean{i + 1}" for i in range(p)]
        + [f"psi{i + 1}" for i in range(m)]
        + ["n_atoms"]
    )
    return pd.DataFrame(data, columns=columns)


def sweep_frame(report: TruncationReport) -> pd.DataFrame:
    """
    Per horizon: payoff, terminal adjoint norm, Cauchy distance to the
    largest horizon and ``|psi_N(tau)|`` of the largest extremal (zero on its
    own horizon).
    """
    tail = list(report.tail_psi_norms)
    if report.per_horizon:
        tail.append(float(np.linalg.norm(report.largest.psi.final())))
    return pd.DataFrame(
        {
            "tau": report.horizons,
            "J_tau": report.payoff_sequence,
            "terminal_psi_norm": [r.residuals.terminal_psi_norm for r in report.per_horizon],
            "cauchy_to_last": report.cauchy_to_last(),
            "tail_psi_norm": tail,
        }
    )


def transversality_frame(sample_times: Sequence[float], psi_norms: Sequence[float], products: Sequence[float]) -> pd.DataFrame:
    return pd.DataFrame(
        {
            "t": [float(t) for t in sample_times],
            "psi_norm": list(psi_norms),
            "product_residual": list(products),
        }
    )


def stability_frame(probe: StabilityProbeReport) -> pd.DataFrame:
    return pd.DataFrame(
        {
            "direction": list(range(len(probe.deviations))),
            "deviation": list(probe.deviations),
        }
    )


def to_csv_text(frame: pd.DataFrame) -> str:
    return frame.to_csv(index=False, float_format=CSV_FLOAT_FORMAT, lineterminator="\n")


def write_csv(frame: pd.DataFrame, path: Path) -> Path:
    return atomic_write_text(Path(path), to_csv_text(frame))


def read_csv(path: Path) -> pd.DataFrame:
    return pd.read_csv(Path(path), float_precision="round_trip")


def read_csv_text(text: str) -> pd.DataFrame:
    return pd.read_csv(StringIO(text), float_precision="round_trip")


__all__ = [
    "TraceRow",
    "read_csv",
    "read_csv_text",
    "relaxed_trace_frame",
    "stability_frame",
    "sweep_frame",
    "to_csv_text",
    "trace_columns",
    "trace_frame",
    "trace_rows",
    "transversality_frame",
    "write_csv",
]
