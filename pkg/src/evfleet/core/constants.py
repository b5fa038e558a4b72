"""Global tolerances and default parameters for evfleet."""

# Numerical tolerances (stated once, used everywhere)
PIVOT_TOL = 1e-9          # Smallest usable pivot element
FEAS_TOL = 1e-7           # Primal feasibility / reduced-cost sign tests
COST_TOL = 1e-9           # Currency comparisons
DUALITY_TOL = 1e-6        # Relative primal/dual objective agreement
GRID_TOL = 1e-9           # Snapping kWh values onto the energy grid

# Physical defaults for generated instances
DEFAULT_E_CAP = 40.0       # kWh
DEFAULT_DT_HOURS = 0.25    # 15 min timesteps
DEFAULT_LEVELS = 10        # delta_e = e_cap / DEFAULT_LEVELS
DEFAULT_CHARGE_LEVELS = 1  # p_max * dt = DEFAULT_CHARGE_LEVELS * delta_e
DEFAULT_ALPHA = 0.30       # currency per kWh missing at the horizon end
DEFAULT_C_UNCOV = 0.60     # currency per kWh of an uncovered reservation

# Column generation
DEFAULT_MAX_ITERATIONS = 500
DEFAULT_MAX_WALL_S = 300.0
DEFAULT_REDUCED_COST_TOL = 1e-7

# Shared wall budget of one solve: column generation gets a share, the
# master solver what is left (never less than MIN_MASTER_S)
DEFAULT_SOLVE_BUDGET_S = 300.0
COLGEN_BUDGET_SHARE = 0.5
MIN_MASTER_S = 1.0

# Enumeration guards
DEFAULT_PATH_LIMIT = 10_000
DEFAULT_ORACLE_MAX_ASSIGNMENTS = 1_000_000

# Benchmark scales used in the reference experiments (n, r_max)
BENCH_SCALES = [
    (1, 4), (1, 8), (1, 16),
    (2, 8), (2, 16), (2, 32),
    (5, 20), (5, 40), (5, 80),
]
