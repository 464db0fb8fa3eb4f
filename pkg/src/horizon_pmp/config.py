#!/usr/bin/env python3
"""
Configuration: process settings from HP_* environment variables, and the
JSON run document consumed by every CLI command.

Run document keys (unknown keys at any level are rejected):

    problem        builtin name, or {"base", "x0", "payoff", "control_set"}
    horizons       strictly increasing positive list
    solver         SolveOptions fields
    probe          {"time", "delta", "n_directions"}
    penalty_n      positive integers
    sample_times   times for transversality columns (default: inner horizons)
    seed           probe direction seed
    grid_per_axis  Box lattice override
    relaxed        use the relaxed solver where a command supports it
    independent    solve sweep horizons cold and in parallel
    output_dir     default for --out
"""

import os
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path
from typing import Any, Dict, List, Mapping, Optional, Union

from .benchmarks import problem_from_spec
from .constants import BUILTIN_PROBLEMS, ENV_PREFIX
from .errors import ConfigError
from .pmp_finite import SolveOptions
from .problem_model import ControlProblem
from .utils import atomic_write_text, json_dumps, json_loads

LOG_LEVELS = ("DEBUG", "INFO", "WARN", "SUCCESS", "ERROR")


def _env(name: str, default: str) -> str:
    return os.getenv(f"{ENV_PREFIX}{name}", default)


@dataclass
class Config:
    """Process settings with environment variable overrides and clamping"""

    log_level: str = field(default_factory=lambda: _env("LOG_LEVEL", "INFO"))
    enable_colors: bool = field(default_factory=lambda: _env("COLOR", "1") == "1")
    enable_sqlite: bool = field(default_factory=lambda: _env("ENABLE_SQLITE", "1") == "1")
    enable_json: bool = field(default_factory=lambda: _env("ENABLE_JSON", "1") == "1")
    workers: int = field(default_factory=lambda: int(_env("WORKERS", "1")))

    def __post_init__(self) -> None:
        self.log_level = self.log_level.upper()
        if self.log_level == "WARNING":
            self.log_level = "WARN"
        if self.log_level not in LOG_LEVELS:
            self.log_level = "INFO"

        if self.workers < 1:
            self.workers = 1
        elif self.workers > 64:
            self.workers = 64

    def with_verbosity(self, verbose: int) -> "Config":
        """-v lowers the threshold to INFO, -vv to DEBUG"""
        if verbose >= 2:
            self.log_level = "DEBUG"
        elif verbose >= 1 and LOG_LEVELS.index(self.log_level) > LOG_LEVELS.index("INFO"):
            self.log_level = "INFO"
        return self


_SOLVER_KEYS = (
    "max_iters",
    "damping",
    "tol_gap",
    "grid_steps_per_unit_time",
    "adaptive_damping",
    "tol_shoot",
    "cauchy_tol",
)
_INLINE_PROBLEM_KEYS = ("base", "x0", "payoff", "control_set")
_CONTROL_SET_KEYS = {"box": ("kind", "lower", "upper", "grid_per_axis"), "finite": ("kind", "points")}


def _reject_unknown(section: str, data: Mapping[str, Any], allowed: Any) -> None:
    unknown = sorted(set(data) - set(allowed))
    if unknown:
        raise ConfigError(f"unknown key(s) in {section}: {', '.join(unknown)}")


@dataclass
class ProbeConfig:
    time: float = 2.0
    delta: float = 1e-3
    n_directions: int = 4

    def __post_init__(self) -> None:
        if self.delta < 0.0:
            raise ConfigError("probe.delta must be non-negative")
        if int(self.n_directions) != self.n_directions or self.n_directions < 1:
            raise ConfigError("probe.n_directions must be a positive integer")


@dataclass
class RunConfig:
    """One run document"""

    problem: Union[str, Dict[str, Any]] = "lqr1d"
    horizons: List[float] = field(default_factory=lambda: [5.0, 10.0, 20.0, 40.0])
    solver: Dict[str, Any] = field(default_factory=dict)
    probe: ProbeConfig = field(default_factory=ProbeConfig)
    penalty_n: List[int] = field(default_factory=lambda: [1, 10, 100])
    sample_times: Optional[List[float]] = None
    seed: int = 0
    grid_per_axis: Optional[int] = None
    relaxed: bool = False
    independent: bool = False
    output_dir: Optional[str] = None

    def __post_init__(self) -> None:
        if isinstance(self.probe, Mapping):
            _reject_unknown("probe", self.probe, [f.name for f in fields(ProbeConfig)])
            self.probe = ProbeConfig(**self.probe)
        _reject_unknown("solver", self.solver, _SOLVER_KEYS)
        self._check_problem()

        self.horizons = [float(h) for h in self.horizons]
        if not self.horizons:
            raise ConfigError("horizons must not be empty")
        if any(h <= 0.0 for h in self.horizons):
            raise ConfigError("horizons must be positive")
        if any(b <= a for a, b in zip(self.horizons, self.horizons[1:])):
            raise ConfigError(f"horizons must be strictly increasing: {self.horizons}")
        if any(int(n) != n or n < 1 for n in self.penalty_n):
            raise ConfigError("penalty_n entries must be positive integers")
        if self.grid_per_axis is not None and self.grid_per_axis < 1:
            raise ConfigError("grid_per_axis must be positive")

    def _check_problem(self) -> None:
        if isinstance(self.problem, str):
            base = self.problem
        elif isinstance(self.problem, Mapping):
            _reject_unknown("problem", self.problem, _INLINE_PROBLEM_KEYS)
            base = self.problem.get("base", "")
            if self.problem.get("payoff", "base") not in ("base", "zero"):
                raise ConfigError("problem.payoff must be 'base' or 'zero'")
            cs = self.problem.get("control_set")
            if cs is not None:
                kind = cs.get("kind")
                if kind not in _CONTROL_SET_KEYS:
                    raise ConfigError("problem.control_set.kind must be 'box' or 'finite'")
                _reject_unknown("problem.control_set", cs, _CONTROL_SET_KEYS[kind])
        else:
            raise ConfigError("problem must be a builtin name or an object")
        if base not in BUILTIN_PROBLEMS:
            raise ConfigError(f"unknown problem {base!r}; valid names: {', '.join(BUILTIN_PROBLEMS)}")

    @property
    def problem_name(self) -> str:
        return self.problem if isinstance(self.problem, str) else str(self.problem["base"])

    @property
    def is_builtin(self) -> bool:
        return isinstance(self.problem, str)

    def build_problem(self) -> ControlProblem:
        return problem_from_spec(self.problem, self.grid_per_axis)

    def solve_options(self) -> SolveOptions:
        return SolveOptions(**self.solver)

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> "RunConfig":
        if not isinstance(data, Mapping):
            raise ConfigError("run document must be a JSON object")
        _reject_unknown("run document", data, [f.name for f in fields(cls)])
        try:
            return cls(**dict(data))
        except TypeError as e:
            raise ConfigError(str(e)) from e

    @classmethod
    def from_file(cls, config_path: Path) -> "RunConfig":
        """Load a run document; missing or malformed files are errors"""
        try:
            text = Path(config_path).read_text(encoding="utf-8")
        except OSError as e:
            raise ConfigError(f"cannot read config {config_path}: {e}") from e
        try:
            data = json_loads(text)
        except ValueError as e:
            raise ConfigError(f"config {config_path} is not valid JSON: {e}") from e
        return cls.from_dict(data)

    def to_dict(self) -> Dict[str, Any]:
        return asdict(self)

    def to_file(self, config_path: Path) -> None:
        atomic_write_text(Path(config_path), json_dumps(self.to_dict(), indent=True) + "\n")


def load_run_config(config_path: Path) -> RunConfig:
    return RunConfig.from_file(config_path)


def save_run_config(cfg: RunConfig, config_path: Path) -> None:
    cfg.to_file(config_path)


__all__ = ["LOG_LEVELS", "Config", "ProbeConfig", "RunConfig", "load_run_config", "save_run_config"]
