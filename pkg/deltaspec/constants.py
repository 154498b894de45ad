"""
Constants that are used throughout the project.
"""
SCHEMA_VERSION = 1

# Exit codes of the command line interface
EXIT_OK = 0
EXIT_CONFIG_ERROR = 1
EXIT_NO_ROOT = 2
EXIT_VIOLATED = 3

# Quadrature defaults
DEFAULT_NODE_COUNT = 64
DEFAULT_NODE_COUNT_2D = 48
DEFAULT_RELATIVE_TOLERANCE = 1e-10
DEFAULT_MAX_REFINEMENTS = 3
DEFAULT_SPLIT_POINT = 8.0
PANEL_COUNT = 28
S_PANEL_COUNT = 24
S_GAUSSIAN_EXTENT = 13.0
MAX_LAGUERRE_NODES = 128

# Linear algebra
CONDITION_LIMIT = 1e12
ROOT_RELATIVE_TOLERANCE = 1e-12
SCAN_POINTS = 48

# Heat kernels
TORUS_CROSSOVER = 0.25
SPHERE_SERIES_THRESHOLD = 1e-4
LEGENDRE_TAIL_EXPONENT = 37.0

# Calibration
CALIBRATION_SAFETY = 1.05
COMPACT_GAUSSIAN_WIDTH = 2.5

# Smoothed spectral sums
MODE_SUM_TARGET_COUNT = 1_200_000
MODE_SUM_SPAN = 40.0
# Unit-sphere eigenvalue scale of the cutoff; the sphere sums run over degrees, not modes
MODE_SUM_SPHERE_CUTOFF = 1e10

# Verdict thresholds
EXPONENT_TOLERANCE = 0.1
IDENTITY_TOLERANCE = 1e-7
SYMMETRY_TOLERANCE = 1e-9
SUBORDINATION_TOLERANCE = 1e-9
ROUTE_TOLERANCE = 1e-8
HEAT_BOUND_TOLERANCE = 1e-6

# Test-function batteries and strong-limit probes
DEFAULT_SEED = 20240611
STRONG_LIMIT_START = 16
DECADE_GROWTH_LIMIT = 1.5
