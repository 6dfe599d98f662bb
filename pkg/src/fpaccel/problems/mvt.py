"""Location/scale estimation for the multivariate t distribution: EM and parameter-expanded EM.

Parameters are flat vectors ``[mu, pack(Sigma)]``. ``packing="tri"`` stores the lower triangle
(``q (q + 1) / 2`` entries, symmetric by construction); ``packing="full"`` stores all ``q^2`` entries
and symmetrizes on unpack.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import linalg, special

from ..core import AccelError, FixedPointProblem
from .rng import make_rng


class SigmaNotPD(AccelError):
    """The scale matrix is not positive definite."""


@dataclass(frozen=True)
class MvtData:
    Y: np.ndarray
    nu: float
    packing: str = "tri"
    seed: int | None = None
    mu_true: np.ndarray | None = None
    sigma_true: np.ndarray | None = None

    def __post_init__(self):
        if self.packing not in ("tri", "full"):
            raise ValueError(f"packing must be 'tri' or 'full', got {self.packing!r}")
        if self.nu <= 0:
            raise ValueError("nu must be positive")
        object.__setattr__(self, "Y", np.atleast_2d(np.asarray(self.Y, dtype=float)))

    @property
    def n(self) -> int:
        return self.Y.shape[0]

    @property
    def q(self) -> int:
        return self.Y.shape[1]

    @property
    def dim(self) -> int:
        q = self.q
        return q + (q * (q + 1) // 2 if self.packing == "tri" else q * q)

    def pack(self, mu, sigma) -> np.ndarray:
        sigma = np.asarray(sigma, dtype=float)
        body = sigma[np.tril_indices(self.q)] if self.packing == "tri" else sigma.ravel()
        return np.concatenate([np.asarray(mu, dtype=float), body])

    def unpack(self, theta) -> tuple[np.ndarray, np.ndarray]:
        q = self.q
        theta = np.asarray(theta, dtype=float)
        mu = theta[:q]
        if self.packing == "tri":
            sigma = np.zeros((q, q))
            sigma[np.tril_indices(q)] = theta[q:]
            sigma = sigma + np.tril(sigma, -1).T
        else:
            sigma = theta[q:].reshape(q, q)
            sigma = 0.5 * (sigma + sigma.T)
        return mu, sigma


def _chol(sigma: np.ndarray) -> np.ndarray:
    try:
        return linalg.cholesky(sigma, lower=True)
    except linalg.LinAlgError as exc:
        raise SigmaNotPD(str(exc)) from None


def _mahalanobis(data: MvtData, mu, chol) -> np.ndarray:
    z = linalg.solve_triangular(chol, (data.Y - mu).T, lower=True)
    return np.sum(z * z, axis=0)


def _weights(data: MvtData, mu, sigma) -> np.ndarray:
    d = _mahalanobis(data, mu, _chol(sigma))
    return (data.nu + data.q) / (data.nu + d)


def _update(data: MvtData, theta, expanded: bool) -> np.ndarray:
    mu, sigma = data.unpack(theta)
    w = _weights(data, mu, sigma)
    mu_new = w @ data.Y / w.sum()
    r = data.Y - mu_new
    sigma_new = (r * w[:, None]).T @ r / (w.sum() if expanded else data.n)
    return data.pack(mu_new, sigma_new)


def mvt_em_map(data: MvtData, theta) -> np.ndarray:
    return _update(data, theta, expanded=False)


def mvt_px_em_map(data: MvtData, theta) -> np.ndarray:
    """Same location update; the scale update is normalized by the summed weights."""
    return _update(data, theta, expanded=True)


def mvt_loglik(data: MvtData, theta) -> float:
    mu, sigma = data.unpack(theta)
    chol = _chol(sigma)
    d = _mahalanobis(data, mu, chol)
    nu, q = data.nu, data.q
    const = (special.gammaln((nu + q) / 2) - special.gammaln(nu / 2)
             - 0.5 * q * np.log(nu * np.pi) - np.sum(np.log(np.diag(chol))))
    return float(data.n * const - 0.5 * (nu + q) * np.sum(np.log1p(d / nu)))


def mvt_feasible(data: MvtData, theta) -> bool:
    try:
        _chol(data.unpack(theta)[1])
    except SigmaNotPD:
        return False
    return True


def gen_mvt(seed: int, n: int = 200, q: int = 10, nu: float = 1.0, rep: int = 0,
            packing: str = "tri") -> MvtData:
    """Zero location, scale ``V V^T`` with standard normal ``V``, draws ``x / sqrt(U / nu)``."""
    rng = make_rng(seed, rep, "mvt")
    V = rng.standard_normal((q, q))
    sigma = V @ V.T
    x = rng.standard_normal((n, q)) @ linalg.cholesky(sigma, lower=True).T
    u = rng.chisquare(nu, size=n)
    Y = x / np.sqrt(u / nu)[:, None]
    return MvtData(Y=Y, nu=nu, packing=packing, seed=seed, mu_true=np.zeros(q), sigma_true=sigma)


def mvt_problem(data: MvtData, expanded: bool = False) -> FixedPointProblem:
    em_map = mvt_px_em_map if expanded else mvt_em_map
    return FixedPointProblem(
        dim=data.dim,
        map=lambda t: em_map(data, t),
        merit=lambda t: mvt_loglik(data, t),
        feasible=lambda t: mvt_feasible(data, t),
        name="mvt-px" if expanded else "mvt",
    )
