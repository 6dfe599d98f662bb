"""Probit regression fitted by EM on the latent-normal representation."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy import special

from ..core import FixedPointProblem
from .rng import make_rng

_SQRT_2_OVER_PI = np.sqrt(2.0 / np.pi)


def inverse_mills(x):
    """``B(x) = phi(x) / (1 - Phi(x))``, computed as ``sqrt(2/pi) / erfcx(x / sqrt(2))``.

    The scaled complementary error function keeps this finite where the naive ratio is 0/0.
    """
    return _SQRT_2_OVER_PI / special.erfcx(np.asarray(x, dtype=float) / np.sqrt(2.0))


@dataclass(frozen=True)
class ProbitData:
    X: np.ndarray
    y: np.ndarray
    seed: int | None = None
    beta_true: np.ndarray | None = None
    _proj: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        X = np.asarray(self.X, dtype=float)
        y = np.asarray(self.y, dtype=float)
        if X.ndim != 2 or y.shape != (X.shape[0],):
            raise ValueError("X must be n x p and y must have length n")
        if not np.all((y == 0) | (y == 1)):
            raise ValueError("responses must be 0 or 1")
        object.__setattr__(self, "X", X)
        object.__setattr__(self, "y", y)
        # (X^T X)^{-1} X^T, cached once
        object.__setattr__(self, "_proj", np.linalg.solve(X.T @ X, X.T))

    @property
    def n(self) -> int:
        return self.X.shape[0]

    @property
    def p(self) -> int:
        return self.X.shape[1]


def probit_em_map(data: ProbitData, beta) -> np.ndarray:
    eta = data.X @ beta
    u = np.where(data.y == 1, eta + inverse_mills(-eta), eta - inverse_mills(eta))
    return data._proj @ u


def probit_loglik(data: ProbitData, beta) -> float:
    eta = data.X @ np.asarray(beta, dtype=float)
    sign = 2.0 * data.y - 1.0
    ll = float(np.sum(special.log_ndtr(sign * eta)))
    return ll if np.isfinite(ll) else -np.inf


def gen_probit(seed: int, n: int = 2000, p: int = 10, rep: int = 0) -> ProbitData:
    """Gaussian design, coefficients ``T/2 + 2`` with ``T ~ t(2)``, responses from the latent model."""
    rng = make_rng(seed, rep, "probit")
    X = rng.standard_normal((n, p))
    beta = rng.standard_t(2, size=p) / 2.0 + 2.0
    z = X @ beta + rng.standard_normal(n)
    y = (z > 0).astype(float)
    return ProbitData(X=X, y=y, seed=seed, beta_true=beta)


def probit_problem(data: ProbitData) -> FixedPointProblem:
    return FixedPointProblem(
        dim=data.p,
        map=lambda b: probit_em_map(data, b),
        merit=lambda b: probit_loglik(data, b),
        name="probit",
    )
