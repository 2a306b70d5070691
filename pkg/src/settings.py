"""Settings and constants for the platform search-contract solvers."""

import math

# Market primitives
MAX_SEARCH_COST = 0.5  # V(0) under the uniform distribution
SYMMETRIC_OPTIMUM_PRICE = math.sqrt(3) / 3  # argmax of p(1 - p^2)

# Numerical tolerances
QUADRATURE_ABS_TOL = 1e-10
ROOT_XTOL = 1e-14
MEMBERSHIP_TOL = 1e-9  # H <= tol counts as implementable
REGIME_BOUNDARY_TOL = 1e-7  # looser proximity used to tag solver output
DEGENERATE_BONUS_TOL = 1e-12
BINDING_TOL = 1e-9
SYMMETRY_TOL = 1e-6  # |p1 - p2| below this tags a symmetric solution
SOLVER_IMPROVEMENT_TOL = 1e-9
CUTOFF_TIE_TOL = 1e-12  # surplus gaps within this count as ties at the purchase cutoff

# Grids and resolutions
MIN_ORACLE_GRID = 1_000
DEFAULT_ORACLE_GRID = 1_000_000
DIAGONAL_SCAN_POINTS = 10_000
MIN_BOUNDARY_RAYS = 64
DEFAULT_BOUNDARY_RAYS = 512
RAY_MARCH_STEPS = 64
RAY_BISECTION_STEPS = 80
CERTIFICATE_RESOLUTION = 400
MIN_CERTIFICATE_RESOLUTION = 50
MULTI_STARTS = 8
CORNER_SWEEP_GRID = 100  # 100 x 100 = 10^4 points
IC_CURVE_POINTS = 200

# Brackets
FIRST_BEST_BRACKET = (0.1, SYMMETRIC_OPTIMUM_PRICE)
CRITICAL_COST_BRACKET = (0.02, 0.08)  # A from 0.8 down to 0.6

# Market simulation
DEFAULT_SEED = 20_240_917
DEFAULT_CONSUMERS = 1_000_000
SIMULATION_BLOCK_SIZE = 250_000
RNG_ALGORITHM = "Philox"
Z_TOLERANCE = 3.0

# Equilibrium search
OFF_PATH_ALPHA = 0.5
CONTRACT_PRICE_TOL = 1e-12
BEST_RESPONSE_GRID = 201
EQUILIBRIUM_TOL = 1e-7
EQUILIBRIUM_MAX_ITER = 200
NASH_GRID = 200
NASH_TOL = 1e-8
UNDERCUT_STEP = 1e-9
