"""Reference accelerators: SQUAREM and the multisecant quasi-Newton scheme of Zhou, Alexander & Lange."""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass

import numpy as np

from .core import FixedPointProblem, SolveReport, SolverConfig, StepOutcome
from .engine import _Run


@dataclass(frozen=True)
class SquaremStep:
    r: np.ndarray
    v: np.ndarray
    steplength: float

    @classmethod
    def from_maps(cls, x, gx, ggx) -> "SquaremStep":
        r = gx - x
        v = ggx - 2.0 * gx + x
        v_norm = np.linalg.norm(v)
        alpha = -np.linalg.norm(r) / v_norm if v_norm > 0 else np.nan
        return cls(r, v, float(alpha))

    def extrapolate(self, x: np.ndarray) -> np.ndarray:
        a = self.steplength
        return x - 2.0 * a * self.r + a * a * self.v


def solve_squarem(problem: FixedPointProblem, x0, config: SolverConfig = SolverConfig()) -> SolveReport:
    """SQUAREM with steplength ``-||r|| / ||v||`` and one stabilizing EM step after each extrapolation.

    With a merit function the extrapolated point must satisfy epsilon-monotonicity, otherwise the
    double EM iterate ``G(G(x))`` is used.
    """
    run = _Run(problem, x0, config, "squarem")
    cfg = run.config
    monotone = problem.merit is not None
    x = run.x0
    merit_x = run.merit(x) if monotone else None
    k = 0
    while run.budget_left(2):
        gx = run.G(x)
        ggx = run.G(gx)
        step = SquaremStep.from_maps(x, gx, ggx)
        resid = float(np.linalg.norm(step.r))
        run.n_iter += 1
        k += 1
        if resid == 0.0:
            run.record(k, 0.0, 0.0, merit_x, StepOutcome.EM)
            break

        if np.isnan(step.steplength):
            out_x, tag, merit_new = ggx, StepOutcome.EM, None
        else:
            t = step.extrapolate(x)
            out = run.screen(t, ggx, merit_x, monotone, cfg.epsilon, x)
            out_x, tag, merit_new = out.x, out.tag, out.merit
            if out.gx is not None:
                # stabilizing EM step, already evaluated by the screen
                out_x, merit_new = out.gx, None
        if monotone and merit_new is None:
            merit_new = run.merit(out_x)
        step_norm = float(np.linalg.norm(out_x - x))
        x, merit_x = out_x, merit_new
        if run.record(k, resid, step_norm, merit_new, tag, lam=step.steplength):
            break
    return run.report(x, merit_x)


class QnzHistory:
    """Last ``q`` secant pairs ``u = G(x) - x`` and ``v = G(G(x)) - G(x)``."""

    def __init__(self, q: int):
        self.q = q
        self._u = deque(maxlen=q)
        self._v = deque(maxlen=q)

    def push(self, u: np.ndarray, v: np.ndarray) -> None:
        self._u.append(u)
        self._v.append(v)

    def __len__(self) -> int:
        return len(self._u)

    @property
    def full(self) -> bool:
        return len(self._u) == self.q

    @property
    def U(self) -> np.ndarray:
        return np.column_stack(self._u)

    @property
    def V(self) -> np.ndarray:
        return np.column_stack(self._v)


def qnz_update(x, f, U, V) -> np.ndarray:
    """``x + f + V (U^T U - U^T V)^{-1} U^T f``; raises ``LinAlgError`` if the q x q system is singular."""
    M = U.T @ U - U.T @ V
    if np.linalg.cond(M) > 1e14:
        raise np.linalg.LinAlgError("singular quasi-Newton system")
    return x + f + V @ np.linalg.solve(M, U.T @ f)


def solve_qnz(problem: FixedPointProblem, x0, config: SolverConfig = SolverConfig()) -> SolveReport:
    """Multisecant quasi-Newton acceleration of order ``config.order``.

    Double EM steps are taken until ``q`` secant pairs are stored. Monotone when a merit function is
    available (rejected steps fall back on ``G(G(x))``).
    """
    run = _Run(problem, x0, config, "qnz")
    q = run.config.order
    monotone = problem.merit is not None
    hist = QnzHistory(q)
    x = run.x0
    merit_x = run.merit(x) if monotone else None
    k = 0
    gx_next = None
    while run.budget_left(1 if gx_next is not None else 2):
        gx = run.G(x) if gx_next is None else gx_next
        ggx = run.G(gx)
        f = gx - x
        hist.push(f, ggx - gx)
        run.n_iter += 1
        k += 1
        resid = float(np.linalg.norm(f))
        if resid == 0.0:
            run.record(k, 0.0, 0.0, merit_x, StepOutcome.EM)
            break

        tag, merit_new, out_x = StepOutcome.EM, None, ggx
        gx_next = None
        if hist.full:
            try:
                t = qnz_update(x, f, hist.U, hist.V)
            except np.linalg.LinAlgError:
                pass
            else:
                out = run.screen(t, ggx, merit_x, monotone, 0.0, x)
                out_x, tag, merit_new = out.x, out.tag, out.merit
                gx_next = out.gx
        if monotone and merit_new is None:
            merit_new = run.merit(out_x)
        step_norm = float(np.linalg.norm(out_x - x))
        x, merit_x = out_x, merit_new
        if run.record(k, resid, step_norm, merit_new, tag, m_k=len(hist)):
            break
    return run.report(x, merit_x)
