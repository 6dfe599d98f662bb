"""Nonparametric MLE of a distribution function from interval-censored data (self-consistency EM)."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..core import AccelError, FixedPointProblem
from .rng import make_rng


class ZeroRowMass(AccelError):
    """Some observation interval carries zero probability under theta."""


@dataclass(frozen=True)
class IntervalCensorData:
    A: np.ndarray
    support: np.ndarray
    left: np.ndarray | None = None
    right: np.ndarray | None = None
    seed: int | None = None

    def __post_init__(self):
        A = np.asarray(self.A, dtype=float)
        if A.ndim != 2:
            raise ValueError("A must be a 2-d incidence matrix")
        if not np.all(A.sum(axis=1) >= 1):
            raise ValueError("every row of A needs at least one nonzero entry")
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "support", np.asarray(self.support, dtype=float))

    @property
    def n(self) -> int:
        return self.A.shape[0]

    @property
    def p(self) -> int:
        return self.A.shape[1]


def incidence_matrix(left, right) -> tuple[np.ndarray, np.ndarray]:
    """Support grid ``s_0 < ... < s_p`` from ``{0, L_i, R_i}`` and ``a_ij = [s_{j-1} >= L_i and s_j <= R_i]``."""
    left = np.asarray(left, dtype=float)
    right = np.asarray(right, dtype=float)
    s = np.unique(np.concatenate([[0.0], left, right]))
    lo, hi = s[:-1], s[1:]
    A = ((lo[None, :] >= left[:, None]) & (hi[None, :] <= right[:, None])).astype(float)
    return A, s


def ic_em_map(data: IntervalCensorData, theta) -> np.ndarray:
    theta = np.asarray(theta, dtype=float)
    mass = data.A @ theta
    if np.any(mass <= 0):
        raise ZeroRowMass("an observation interval has zero probability")
    new = theta * (data.A.T @ (1.0 / mass)) / data.n
    return new / new.sum()


def ic_loglik(data: IntervalCensorData, theta) -> float:
    mass = data.A @ np.asarray(theta, dtype=float)
    if np.any(mass <= 0):
        return -np.inf
    return float(np.sum(np.log(mass)))


NEG_TOL = 1e-4


def ic_feasible(data: IntervalCensorData, theta, neg_tol: float = NEG_TOL) -> bool:
    """Every observation interval must carry positive mass and no component may fall below
    ``-neg_tol``. ``neg_tol=0`` is the exact simplex; ``neg_tol=inf`` keeps only the mass check."""
    theta = np.asarray(theta)
    if theta.min() < -neg_tol:
        return False
    return bool(np.all(data.A @ theta > 0))


def gen_interval_censor(seed: int, n: int = 2000, rep: int = 0) -> IntervalCensorData:
    """Weibull(shape 3, scale 5) failure times observed through Poisson(5) inspection times.

    Inspection times are ``floor(Uniform(0, 500)) / 50``; the interval is bounded by the nearest
    inspections below and above the failure time, with 0 and infinity when there are none.
    """
    rng = make_rng(seed, rep, "interval")
    x = 5.0 * rng.weibull(3.0, size=n)
    counts = rng.poisson(5.0, size=n)
    left = np.zeros(n)
    right = np.full(n, np.inf)
    for i, k in enumerate(counts):
        e = np.floor(rng.uniform(0.0, 500.0, size=k)) / 50.0
        below = e[e < x[i]]
        above = e[e > x[i]]
        if below.size:
            left[i] = below.max()
        if above.size:
            right[i] = above.min()
    A, s = incidence_matrix(left, right)
    return IntervalCensorData(A=A, support=s, left=left, right=right, seed=seed)


def ic_problem(data: IntervalCensorData, neg_tol: float = NEG_TOL) -> FixedPointProblem:
    return FixedPointProblem(
        dim=data.p,
        map=lambda t: ic_em_map(data, t),
        merit=lambda t: ic_loglik(data, t),
        feasible=lambda t: ic_feasible(data, t, neg_tol),
        name="ic",
    )
