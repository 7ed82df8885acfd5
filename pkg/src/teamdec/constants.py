"""Numeric tolerances and caps used throughout the package.

Every tolerance that appears in a public contract lives here so reports
can embed the full set in force.
"""

# Input probability masses may be off by this much before normalization
# is refused; within it, vectors are renormalized exactly.
INPUT_MASS_TOL = 1e-9

# Exact-identity checks on probabilities and conditionals.
EQ_TOL = 1e-12

# Expected-cost agreement between a problem and its static reduction.
REDUCTION_TOL = 1e-10

# Agreement between the mixture linear program and brute-force enumeration.
LP_TOL = 1e-9

# Midpoint convexity slack on grids, and the margin rate for the separate
# strictness report (margin >= STRICT_RATE * squared distance).
MIDPOINT_TOL = 1e-9
STRICT_RATE = 1e-9

# Stationarity: central finite-difference step and the gradient-norm gate.
FD_STEP = 1e-5
STATIONARITY_TOL = 1e-6

# A sampled variational inequality refutes optimality below this floor.
KRAINAK_TOL = 1e-8

# Default cap on enumerations (deterministic profiles, joint table cells).
ENUM_CAP = 10**6

# Cells allowed in a materialized joint or reduced table.
TABLE_CAP = 2 * 10**7


def tolerances() -> dict:
    """All constants above, keyed by name, for embedding into reports."""
    return {
        "input_mass_tol": INPUT_MASS_TOL,
        "eq_tol": EQ_TOL,
        "reduction_tol": REDUCTION_TOL,
        "lp_tol": LP_TOL,
        "midpoint_tol": MIDPOINT_TOL,
        "strict_rate": STRICT_RATE,
        "fd_step": FD_STEP,
        "stationarity_tol": STATIONARITY_TOL,
        "krainak_tol": KRAINAK_TOL,
        "enum_cap": ENUM_CAP,
        "table_cap": TABLE_CAP,
    }
