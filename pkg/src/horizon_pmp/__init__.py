"""
horizon_pmp: finite-horizon maximum principle solvers and the diagnostics
that pass their extremals to an infinite horizon.

Import submodules directly, e.g. ``from horizon_pmp.pmp_finite import
solve_free_endpoint``; nothing is re-exported here so the CLI and the
config layer load without import cycles.
"""

# Keep in sync with pyproject.toml
__version__ = "0.1.0"
__description__ = "Infinite-horizon optimal control through finite-horizon truncations"

__all__ = ["__version__"]
