"""EM iteration and the Anderson acceleration family (original, restarted, order one, damped)."""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Optional

import numpy as np

from . import damping
from .core import (
    AccelError,
    Counter,
    DimensionMismatch,
    FixedPointProblem,
    MeritMissing,
    NonFiniteIterate,
    SolveReport,
    SolverConfig,
    StepOutcome,
    TraceEntry,
    check_start,
)

logger = logging.getLogger(__name__)


def compute_delta(s: float, config: SolverConfig) -> float:
    """Relative damping ``1 / (1 + alpha^(kappa - s))``."""
    return 1.0 / (1.0 + config.alpha ** (config.kappa - s))


class AccelState:
    """Mutable per-solve state. Histories live in fixed p x m ring buffers."""

    def __init__(self, x: np.ndarray, f: np.ndarray, m: int):
        p = x.size
        self.x = x
        self.f = f
        self.capacity = m
        self._X = np.zeros((p, m))
        self._F = np.zeros((p, m))
        self._head = 0
        self._count = 0
        self.m_k = 0
        self.c = 1
        self.s = 0
        self.merit_anchor: Optional[float] = None
        self.lambda_warm: Optional[float] = None
        self.r_warm: Optional[float] = None

    def push(self, dx: np.ndarray, df: np.ndarray) -> None:
        self._X[:, self._head] = dx
        self._F[:, self._head] = df
        self._head = (self._head + 1) % self.capacity
        self._count = min(self._count + 1, self.capacity)

    def history(self, m_k: Optional[int] = None) -> tuple[np.ndarray, np.ndarray]:
        """Most recent ``m_k`` difference columns, oldest first."""
        m_k = self.m_k if m_k is None else m_k
        if m_k > self._count:
            raise DimensionMismatch(f"requested {m_k} history columns, only {self._count} stored")
        idx = (self._head - m_k + np.arange(m_k)) % self.capacity
        return self._X[:, idx], self._F[:, idx]

    @property
    def X_hist(self) -> np.ndarray:
        return self.history()[0]

    @property
    def F_hist(self) -> np.ndarray:
        return self.history()[1]


def aa_step(state: AccelState, gamma) -> np.ndarray:
    """Candidate ``x_k + f_k - (X_k + F_k) gamma``; does not modify ``state``."""
    gamma = np.atleast_1d(np.asarray(gamma, dtype=float))
    if gamma.shape != (state.m_k,):
        raise DimensionMismatch(f"gamma has length {gamma.size}, expected {state.m_k}")
    X, F = state.history()
    return state.x + state.f - (X + F) @ gamma


@dataclass
class _Outcome:
    x: np.ndarray
    tag: StepOutcome
    merit: Optional[float]
    # G(x) when it was already evaluated during screening
    gx: Optional[np.ndarray] = None


class _Run:
    """Bookkeeping shared by all solvers: counters, convergence, trace and report assembly."""

    def __init__(self, problem: FixedPointProblem, x0, config: SolverConfig, method: str):
        self.problem = problem
        self.x0 = check_start(problem, x0)
        self.config = config.resolve(problem.dim)
        self.method = method
        self.calls = Counter(problem)
        self.trace = [] if config.trace else None
        self.n_iter = 0
        self.fallbacks = {t.value: 0 for t in StepOutcome if t.is_fallback}
        self.converged = False

    def G(self, x: np.ndarray) -> np.ndarray:
        try:
            gx = self.calls.map(x)
        except (NonFiniteIterate, DimensionMismatch):
            raise
        except AccelError as exc:
            raise NonFiniteIterate(f"{self.method}: fixed-point map failed: {exc}") from exc
        if not np.all(np.isfinite(gx)):
            raise NonFiniteIterate(f"{self.method}: fixed-point map returned non-finite values")
        return gx

    def merit(self, x: np.ndarray) -> float:
        return self.calls.merit(x)

    def budget_left(self, needed: int = 1) -> bool:
        return self.calls.n_map + needed <= self.config.max_fevals

    def record(self, k, resid_norm, step_norm, merit, tag, delta=None, lam=None, m_k=0, c=0, s=0):
        if tag.is_fallback:
            self.fallbacks[tag.value] += 1
        if self.trace is not None:
            self.trace.append(TraceEntry(k, resid_norm, step_norm, merit, delta, lam, tag, m_k, c, s))
        if step_norm < self.config.tol:
            self.converged = True
        return self.converged

    def report(self, x: np.ndarray, merit: Optional[float] = None) -> SolveReport:
        if merit is None and self.problem.merit is not None:
            merit = self.merit(x)
        if not self.converged:
            logger.info("%s stopped at the map-evaluation cap (%d)", self.method, self.calls.n_map)
        return SolveReport(
            x_hat=x,
            merit_final=merit,
            converged=self.converged,
            n_map_evals=self.calls.n_map,
            n_merit_evals=self.calls.n_merit,
            n_iterations=self.n_iter,
            n_fallbacks=sum(self.fallbacks.values()),
            method=self.method,
            fallback_counts=dict(self.fallbacks),
            trace=self.trace,
        )

    def screen(self, t: np.ndarray, gx: np.ndarray, merit_x: Optional[float],
               monotone: bool, epsilon: float, x: Optional[np.ndarray] = None) -> _Outcome:
        """Accept the candidate ``t`` or fall back on the EM iterate ``gx``.

        An accepted candidate is mapped immediately: if ``G(t)`` fails or leaves the feasible
        set the candidate is rejected, so the EM successor of every accepted iterate exists.
        The value is handed back for reuse by the next iteration. Passing the current iterate
        ``x`` skips that evaluation when the step already meets the tolerance.
        """
        if not np.all(np.isfinite(t)):
            return _Outcome(gx, StepOutcome.FALLBACK_NONFINITE, None)
        if not self.problem.is_feasible(t):
            return _Outcome(gx, StepOutcome.FALLBACK_INFEASIBLE, None)
        merit_t = None
        if monotone:
            merit_t = self.merit(t)
            if not (np.isfinite(merit_t) and merit_t >= merit_x - epsilon):
                return _Outcome(gx, StepOutcome.FALLBACK_MONOTONICITY, None)
        converging = x is not None and np.linalg.norm(t - x) < self.config.tol
        if converging or not self.budget_left():
            return _Outcome(t, StepOutcome.ACCEPTED, merit_t)
        try:
            gt = self.G(t)
        except NonFiniteIterate:
            return _Outcome(gx, StepOutcome.FALLBACK_NONFINITE, None)
        if not self.problem.is_feasible(gt):
            return _Outcome(gx, StepOutcome.FALLBACK_INFEASIBLE, None)
        return _Outcome(t, StepOutcome.ACCEPTED, merit_t, gt)


def solve_em(problem: FixedPointProblem, x0, config: SolverConfig = SolverConfig()) -> SolveReport:
    """Plain fixed-point iteration ``x_{k+1} = G(x_k)``."""
    run = _Run(problem, x0, config, "em")
    x = run.x0
    while run.budget_left():
        gx = run.G(x)
        run.n_iter += 1
        step = float(np.linalg.norm(gx - x))
        trace_merit = None
        if run.trace is not None and problem.merit is not None:
            trace_merit = run.merit(gx)
        x = gx
        if run.record(run.n_iter, step, step, trace_merit, StepOutcome.EM):
            break
    return run.report(x)


def _anderson(problem, x0, config, *, method, restart, damped, monotone) -> SolveReport:
    """Shared driver for the original, restarted and damped schemes."""
    if (damped or monotone) and problem.merit is None:
        raise MeritMissing(f"{method} requires a merit function")
    run = _Run(problem, x0, config, method)
    cfg = run.config
    m = cfg.order
    x_prev = run.x0

    gx = run.G(x_prev)
    f_prev = gx - x_prev
    x = gx
    run.n_iter += 1
    step = float(np.linalg.norm(f_prev))
    merit_x = run.merit(x) if monotone else None
    if run.record(0, step, step, merit_x, StepOutcome.EM):
        return run.report(x, merit_x)

    state = AccelState(x, f_prev, m)
    state.merit_anchor = merit_x
    k = 1
    gx_next = None
    while gx_next is not None or run.budget_left():
        gx = run.G(x) if gx_next is None else gx_next
        f = gx - x
        state.x, state.f = x, f
        state.push(x - x_prev, f - f_prev)
        state.m_k = min(m, state.c) if restart else min(m, k)
        X, F = state.history()
        svd = damping.svd_factors(F, f)

        delta = lam = None
        if damped:
            delta = compute_delta(state.s, cfg)
            try:
                sol = damping.find_lambda(svd, None, state.lambda_warm, state.r_warm,
                                          state.s, cfg.alpha, cfg.kappa)
            except (damping.AllSingularValuesZero, damping.ZeroResidualProjection):
                gamma = np.zeros(state.m_k)
            else:
                lam = sol.lambda_
                state.lambda_warm, state.r_warm = sol.lambda_, sol.r
                gamma = damping.ridge_gamma(svd, None, lam)
        else:
            gamma = damping.ridge_gamma(svd, None, 0.0)

        t = aa_step(state, gamma)
        out = run.screen(t, gx, merit_x, monotone, cfg.epsilon, x)
        gx_next = out.gx
        run.n_iter += 1

        s_new = state.s
        merit_new = None
        if monotone:
            merit_new = out.merit if out.merit is not None else run.merit(out.x)
            if damped and out.tag is StepOutcome.ACCEPTED:
                s_new = state.s + 1

        m_k, c_k, s_k = state.m_k, state.c, state.s
        if restart:
            if k % m == 0:
                if damped and merit_new < state.merit_anchor - cfg.epsilon_c:
                    s_new = max(s_new - m, -cfg.damping_floor)
                state.c = 1
                state.merit_anchor = merit_new
            else:
                state.c += 1
        state.s = s_new

        step = float(np.linalg.norm(out.x - x))
        x_prev, f_prev = x, f
        x = out.x
        merit_x = merit_new
        resid = float(np.linalg.norm(f))
        if run.record(k, resid, step, merit_new, out.tag, delta, lam, m_k, c_k, s_k):
            break
        k += 1
    return run.report(x, merit_x)


def solve_aa(problem: FixedPointProblem, x0, config: SolverConfig = SolverConfig()) -> SolveReport:
    """Original Anderson acceleration: growing history up to ``m``, least-squares coefficients."""
    return _anderson(problem, x0, config, method="aa", restart=False, damped=False, monotone=False)


def solve_aa_monotone(problem: FixedPointProblem, x0,
                      config: SolverConfig = SolverConfig()) -> SolveReport:
    """Original Anderson acceleration with epsilon-monotonicity control and EM fallback."""
    return _anderson(problem, x0, config, method="aa_eps", restart=False, damped=False, monotone=True)


def solve_raa(problem: FixedPointProblem, x0, config: SolverConfig = SolverConfig()) -> SolveReport:
    """Anderson acceleration restarted every ``m`` iterations."""
    return _anderson(problem, x0, config, method="raa", restart=True, damped=False, monotone=False)


def solve_daarem(problem: FixedPointProblem, x0, config: SolverConfig = SolverConfig()) -> SolveReport:
    """Damped, restarted Anderson acceleration with epsilon-monotonicity (DAAREM)."""
    return _anderson(problem, x0, config, method="daarem", restart=True, damped=True, monotone=True)


def solve_aa1(problem: FixedPointProblem, x0, config: SolverConfig = SolverConfig()) -> SolveReport:
    """Order-one Anderson acceleration ``(1 - g) G(x_k) + g G(x_{k-1})``.

    Monotonicity control is applied whenever the problem has a merit function.
    """
    run = _Run(problem, x0, config, "aa1")
    cfg = run.config
    monotone = problem.merit is not None
    x_prev = run.x0
    g_prev = run.G(x_prev)
    f_prev = g_prev - x_prev
    x = g_prev
    run.n_iter += 1
    step = float(np.linalg.norm(f_prev))
    merit_x = run.merit(x) if monotone else None
    if run.record(0, step, step, merit_x, StepOutcome.EM):
        return run.report(x, merit_x)

    k = 1
    gx_next = None
    while gx_next is not None or run.budget_left():
        gx = run.G(x) if gx_next is None else gx_next
        f = gx - x
        df = f - f_prev
        denom = float(df @ df)
        gamma = float(df @ f) / denom if denom > 0 else 0.0
        t = (1.0 - gamma) * gx + gamma * g_prev
        out = run.screen(t, gx, merit_x, monotone, cfg.epsilon, x)
        gx_next = out.gx
        run.n_iter += 1
        merit_new = None
        if monotone:
            merit_new = out.merit if out.merit is not None else run.merit(out.x)
        step = float(np.linalg.norm(out.x - x))
        x_prev, f_prev, g_prev = x, f, gx
        x = out.x
        merit_x = merit_new
        if run.record(k, float(np.linalg.norm(f)), step, merit_new, out.tag, m_k=1, c=1):
            break
        k += 1
    return run.report(x, merit_x)
