"""Fixed-point acceleration for EM/MM algorithms."""

from .baselines import solve_qnz, solve_squarem
from .core import (
    DimensionMismatch,
    FixedPointProblem,
    MeritMissing,
    NonFiniteIterate,
    SolveReport,
    SolverConfig,
    StepOutcome,
    TraceEntry,
    default_order,
)
from .engine import (
    AccelState,
    aa_step,
    compute_delta,
    solve_aa,
    solve_aa1,
    solve_aa_monotone,
    solve_daarem,
    solve_em,
    solve_raa,
)

SOLVERS = {
    "em": solve_em,
    "aa": solve_aa,
    "aa_eps": solve_aa_monotone,
    "raa": solve_raa,
    "aa1": solve_aa1,
    "daarem": solve_daarem,
    "squarem": solve_squarem,
    "qnz": solve_qnz,
}

__all__ = [
    "AccelState", "DimensionMismatch", "FixedPointProblem", "MeritMissing", "NonFiniteIterate",
    "SOLVERS", "SolveReport", "SolverConfig", "StepOutcome", "TraceEntry", "aa_step",
    "compute_delta", "default_order", "solve_aa", "solve_aa1", "solve_aa_monotone",
    "solve_daarem", "solve_em", "solve_qnz", "solve_raa", "solve_squarem",
]

__version__ = "0.1.0"
