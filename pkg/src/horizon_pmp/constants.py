"""Pure constants: no I/O, no numerics."""

APP_NAME = "horizon-pmp"
ENV_PREFIX = "HP_"

# Lattice defaults for Box control sets
DEFAULT_GRID_1D = 101
DEFAULT_GRID_2D = 21

# Finite-difference checks
FD_STEP = 1e-6
FD_RTOL = 1e-5
N_JACOBIAN_POINTS = 20

# Ties in argmax are resolved relative to the largest |H| on the lattice
TIE_RTOL = 1e-12
NODE_ATOL = 1e-12
WEIGHT_ATOL = 1e-12
NORMALIZATION_ATOL = 1e-9

# Forward-backward sweep
DEFAULT_MAX_ITERS = 500
DEFAULT_DAMPING = 0.5
DEFAULT_TOL_GAP = 1e-6
DEFAULT_STEPS_PER_UNIT = 100
MIN_DAMPING = 1.0 / 64.0
# Lattice polish: single-cell flips tried after the block trials
POLISH_SINGLES = 8
# A flip must raise J by more than this, relative to max(|J|, 1)
POLISH_RTOL = 1e-14

# Shooting in one state dimension falls back to bisection
MAX_BISECTION_ITERS = 200
BRACKET_EXPANSIONS = 40

# Shooting
DEFAULT_TOL_SHOOT = 1e-8
MAX_NEWTON_ITERS = 50
STAGNATION_WINDOW = 5
STAGNATION_ATOL = 1e-12
MAX_FD_STEP = 1e-1

# Horizon sweeps
DEFAULT_CAUCHY_TOL = 1e-2
MONOTONE_SLACK = 1e-12

# Tail bound
TAIL_RTOL = 1e-6
TAIL_ATOL = 1e-9

# CSV emission
CSV_FLOAT_FORMAT = "%.17g"

BUILTIN_PROBLEMS = ("lqr1d", "ramsey", "absvalue")

# CLI exit codes
EXIT_OK = 0
EXIT_ERROR = 1
EXIT_FLAGGED = 2

DEFAULT_OUTPUT_DIR = "out"

__all__ = [name for name in dir() if name.isupper()]
