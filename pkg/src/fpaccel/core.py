"""Problem, configuration, state and report types shared by every solver."""

from __future__ import annotations

import enum
import json
from dataclasses import dataclass, field, replace
from typing import Callable, List, Optional

import numpy as np


class AccelError(Exception):
    """Base class for solver errors."""


class NonFiniteIterate(AccelError):
    """The fixed-point map produced NaN or Inf."""


class MeritMissing(AccelError):
    """A merit-driven method was called on a problem without a merit function."""


class DimensionMismatch(AccelError, ValueError):
    """Vector or matrix shapes are inconsistent."""


@dataclass(frozen=True)
class FixedPointProblem:
    """A fixed-point map ``x -> G(x)`` on R^dim plus optional merit and feasibility checks.

    ``merit`` is maximized (a log-likelihood for EM maps). ``feasible`` returns False for
    points outside the parameter space; solvers never evaluate ``map`` or ``merit`` there.
    """

    dim: int
    map: Callable[[np.ndarray], np.ndarray]
    merit: Optional[Callable[[np.ndarray], float]] = None
    feasible: Optional[Callable[[np.ndarray], bool]] = None
    name: str = "problem"

    def is_feasible(self, x: np.ndarray) -> bool:
        if not np.all(np.isfinite(x)):
            return False
        return True if self.feasible is None else bool(self.feasible(x))


def default_order(p: int) -> int:
    """10 when there are more than 20 parameters, otherwise floor(p/2) (at least 1)."""
    return 10 if p > 20 else max(1, p // 2)


@dataclass(frozen=True)
class SolverConfig:
    """Tuning knobs. ``order`` and ``damping_floor`` default to values derived from the dimension."""

    order: Optional[int] = None
    epsilon: float = 0.01
    epsilon_c: float = 0.0
    alpha: float = 1.2
    kappa: float = 25.0
    damping_floor: Optional[int] = None
    tol: float = 1e-8
    max_fevals: int = 25000
    trace: bool = False

    def __post_init__(self):
        if self.order is not None and self.order < 1:
            raise ValueError(f"order must be >= 1, got {self.order}")
        if self.alpha <= 1:
            raise ValueError(f"alpha must be > 1, got {self.alpha}")
        if self.kappa < 0 or self.epsilon < 0 or self.epsilon_c < 0:
            raise ValueError("kappa, epsilon and epsilon_c must be nonnegative")
        if self.damping_floor is not None and self.damping_floor < 0:
            raise ValueError(f"damping_floor must be >= 0, got {self.damping_floor}")
        if self.tol <= 0:
            raise ValueError(f"tol must be positive, got {self.tol}")
        if self.max_fevals < 1:
            raise ValueError(f"max_fevals must be positive, got {self.max_fevals}")

    def resolve(self, p: int) -> "SolverConfig":
        """Fill in dimension-dependent defaults and clamp the order to at most ``p``."""
        m = default_order(p) if self.order is None else self.order
        m = min(m, p)
        floor = 2 * m if self.damping_floor is None else self.damping_floor
        return replace(self, order=m, damping_floor=floor)


class StepOutcome(str, enum.Enum):
    ACCEPTED = "ExtrapolatedAccepted"
    FALLBACK_MONOTONICITY = "FellBackMonotonicity"
    FALLBACK_NONFINITE = "FellBackNonFinite"
    FALLBACK_INFEASIBLE = "FellBackInfeasible"
    # plain fixed-point steps (EM, warm-up, initial step) carry this tag
    EM = "EM"

    @property
    def is_fallback(self) -> bool:
        return self in (
            StepOutcome.FALLBACK_MONOTONICITY,
            StepOutcome.FALLBACK_NONFINITE,
            StepOutcome.FALLBACK_INFEASIBLE,
        )


@dataclass
class TraceEntry:
    k: int
    resid_norm: float
    step_norm: float
    merit: Optional[float]
    delta: Optional[float]
    lambda_: Optional[float]
    outcome: StepOutcome
    m_k: int = 0
    c: int = 0
    s: int = 0

    def to_json(self) -> str:
        return json.dumps({
            "k": self.k,
            "step_norm": self.step_norm,
            "merit": self.merit,
            "delta": self.delta,
            "lambda": self.lambda_,
            "outcome": self.outcome.value,
            "resid_norm": self.resid_norm,
            "m_k": self.m_k,
            "c": self.c,
            "s": self.s,
        })


@dataclass(frozen=True)
class SolveReport:
    x_hat: np.ndarray
    merit_final: Optional[float]
    converged: bool
    n_map_evals: int
    n_merit_evals: int
    n_iterations: int
    n_fallbacks: int
    method: str = ""
    fallback_counts: dict = field(default_factory=dict)
    trace: Optional[List[TraceEntry]] = None

    def write_trace(self, path) -> None:
        """Write the trace as JSON lines, one object per iteration."""
        with open(path, "w") as fh:
            for entry in self.trace or []:
                fh.write(entry.to_json() + "\n")


class Counter:
    """Wraps a problem's map and merit to count evaluations."""

    def __init__(self, problem: FixedPointProblem):
        self.problem = problem
        self.n_map = 0
        self.n_merit = 0

    def map(self, x: np.ndarray) -> np.ndarray:
        self.n_map += 1
        gx = np.asarray(self.problem.map(x), dtype=float)
        if gx.shape != x.shape:
            raise DimensionMismatch(f"map returned shape {gx.shape}, expected {x.shape}")
        return gx

    def merit(self, x: np.ndarray) -> float:
        self.n_merit += 1
        return float(self.problem.merit(x))


def check_start(problem: FixedPointProblem, x0) -> np.ndarray:
    x0 = np.array(x0, dtype=float).ravel()
    if x0.shape != (problem.dim,):
        raise DimensionMismatch(f"x0 has length {x0.size}, problem dimension is {problem.dim}")
    if not np.all(np.isfinite(x0)):
        raise NonFiniteIterate("starting value is not finite")
    return x0
