"""Ridge-damped extrapolation coefficients and the damping-parameter root finder.

The extrapolation coefficients solve ``min ||f - F gamma||^2 + lam ||gamma||^2``. Everything is
computed from a thin SVD ``F = U diag(d) V^T``; singular values below ``ZERO_TOL * d_max`` are
treated as exact zeros and dropped from every sum.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .core import AccelError

ZERO_TOL = 1e-12
MAX_NEWTON_STEPS = 50


class AllSingularValuesZero(AccelError):
    """The difference matrix is numerically zero; the caller should take a plain EM step."""


class ZeroResidualProjection(AccelError):
    """``s(lambda)`` vanished, so the damping parameter has no effect."""


@dataclass(frozen=True)
class SvdFactors:
    U: np.ndarray
    d: np.ndarray
    V: np.ndarray
    uf: np.ndarray

    @property
    def keep(self) -> np.ndarray:
        if self.d.size == 0 or self.d[0] <= 0:
            return np.zeros(self.d.shape, dtype=bool)
        return self.d > ZERO_TOL * self.d[0]

    @property
    def rank(self) -> int:
        return int(self.keep.sum())


def svd_factors(F: np.ndarray, f: np.ndarray) -> SvdFactors:
    F = np.atleast_2d(np.asarray(F, dtype=float))
    U, d, Vt = np.linalg.svd(F, full_matrices=False)
    return SvdFactors(U=U, d=d, V=Vt.T, uf=U.T @ f)


def _kept(svd: SvdFactors, f) -> tuple[np.ndarray, np.ndarray]:
    uf = svd.uf if f is None else svd.U.T @ np.asarray(f, dtype=float)
    keep = svd.keep
    return svd.d[keep], uf[keep]


def ls_norm(svd: SvdFactors, f=None) -> float:
    """Norm of the minimum-norm least-squares coefficients."""
    d, uf = _kept(svd, f)
    return float(np.sqrt(np.sum((uf / d) ** 2)))


def ridge_gamma(svd: SvdFactors, f, lam: float) -> np.ndarray:
    """``V diag(d / (d^2 + lam)) U^T f``; at ``lam = 0`` this is the minimum-norm LS solution."""
    if lam < 0:
        raise ValueError(f"lambda must be nonnegative, got {lam}")
    uf = svd.uf if f is None else svd.U.T @ np.asarray(f, dtype=float)
    keep = svd.keep
    scale = np.zeros_like(svd.d)
    d = svd.d[keep]
    scale[keep] = d / (d * d + lam)
    return svd.V @ (scale * uf)


def h_of_lambda(svd: SvdFactors, f, delta: float, lam: float) -> float:
    d, uf = _kept(svd, f)
    if d.size == 0:
        raise AllSingularValuesZero("all singular values are below the zero threshold")
    return float(delta * np.sum((uf / d) ** 2) - np.sum((d * uf / (d * d + lam)) ** 2))


def _phi(d, uf, v_target, lam):
    du = d * uf
    denom = d * d + lam
    s_norm = math.sqrt(float(np.sum((du / denom) ** 2)))
    if s_norm == 0.0:
        raise ZeroResidualProjection("s(lambda) is zero")
    dphi = -float(np.sum(du * du / denom ** 3)) / s_norm
    return s_norm - v_target, dphi, s_norm


def phi_and_derivative(svd: SvdFactors, f, v_target: float, lam: float) -> tuple[float, float, float]:
    """Return ``phi(lam) = ||s(lam)|| - v_target``, its derivative, and ``||s(lam)||``."""
    d, uf = _kept(svd, f)
    return _phi(d, uf, v_target, lam)


def stopping_band(s_k: float, alpha: float, kappa: float) -> tuple[float, float]:
    """Acceptance band for ``||s(lam)|| / ||beta_LS||``: logit-scale midpoints to neighbouring deltas."""
    lower = (1.0 + alpha ** (kappa - s_k + 0.5)) ** -0.5
    upper = (1.0 + alpha ** (kappa - s_k - 0.5)) ** -0.5
    return lower, upper


@dataclass(frozen=True)
class DampingSolution:
    lambda_: float
    r: float
    n_newton_steps: int
    converged: bool = True


def find_lambda(svd: SvdFactors, f, lambda_old, r_old, s_k: float,
                alpha: float, kappa: float) -> DampingSolution:
    """Safeguarded Newton iteration for ``||s(lam)|| = sqrt(delta_k) ||beta_LS||``.

    ``lambda_old``/``r_old`` warm-start the iteration; pass ``None`` on the first call, in which
    case the iteration starts from the geometric midpoint of the initial bracket.
    """
    d, uf = _kept(svd, f)
    if d.size == 0:
        raise AllSingularValuesZero("all singular values are below the zero threshold")
    beta_norm = float(np.sqrt(np.sum((uf / d) ** 2)))
    if beta_norm == 0.0:
        raise ZeroResidualProjection("least-squares coefficients are zero")

    delta = 1.0 / (1.0 + alpha ** (kappa - s_k))
    l_stop, u_stop = stopping_band(s_k, alpha, kappa)
    if u_stop >= 1.0:
        return DampingSolution(0.0, 0.0, 0)
    lo_target, hi_target = l_stop * beta_norm, u_stop * beta_norm

    v = math.sqrt(delta) * beta_norm
    phi0, dphi0, _ = _phi(d, uf, v, 0.0)
    L = -phi0 / dphi0
    U = float(np.linalg.norm(d * uf)) / v
    if lambda_old is None or r_old is None:
        lam = math.sqrt(L * U)
    else:
        lam = lambda_old - r_old / v

    for t in range(1, MAX_NEWTON_STEPS + 1):
        if not (L < lam < U):
            lam = max(1e-3 * U, math.sqrt(L * U))
        phi, dphi, s_norm = _phi(d, uf, v, lam)
        if lo_target <= s_norm <= hi_target:
            return DampingSolution(lam, s_norm * phi / dphi, t)
        if phi < 0:
            U = lam
        L = max(L, lam - phi / dphi)
        if L > U:
            L = U
        lam = lam - (s_norm / v) * (phi / dphi)

    lam = math.sqrt(L * U)
    phi, dphi, s_norm = _phi(d, uf, v, lam)
    return DampingSolution(lam, s_norm * phi / dphi, MAX_NEWTON_STEPS, converged=False)
