"""Posterior / ridge statistics for Gaussian linear models.

The running state keeps the precision matrix ``inv_cov`` and the covariance
``cov`` side by side. ``cov`` is maintained with the Sherman-Morrison
identity (O(d^2) per observation) and rebuilt from ``inv_cov`` by a full
Cholesky solve every ``REFACTOR_EVERY`` updates.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg import blas, cho_factor, cho_solve

REFACTOR_EVERY = 512
SYMMETRY_TOL = 1e-12


class NotPositiveDefiniteError(np.linalg.LinAlgError):
    """Raised when a Cholesky pivot is not strictly positive."""


@dataclass
class RidgeState:
    """Online ridge regression / Gaussian posterior statistics.

    ``cov`` is ``(I/lam + sum_s a_s a_s^T / sigma^2)^{-1}`` and ``theta_hat``
    the matching posterior mean (ridge estimate).
    """

    dim: int
    lam: float
    sigma: float
    inv_cov: np.ndarray
    cov: np.ndarray
    theta_hat: np.ndarray
    count: int = 0

    @classmethod
    def fresh(cls, dim: int, lam: float = 1.0, sigma: float = 1.0) -> "RidgeState":
        if dim < 1:
            raise ValueError(f"dimension must be positive, got {dim}")
        if lam <= 0 or sigma <= 0:
            raise ValueError(f"lam and sigma must be positive, got lam={lam}, sigma={sigma}")
        return cls(
            dim=dim,
            lam=float(lam),
            sigma=float(sigma),
            inv_cov=np.eye(dim) / lam,
            cov=np.eye(dim) * lam,
            theta_hat=np.zeros(dim),
            count=0,
        )

    def copy(self) -> "RidgeState":
        return RidgeState(
            dim=self.dim,
            lam=self.lam,
            sigma=self.sigma,
            inv_cov=self.inv_cov.copy(),
            cov=self.cov.copy(),
            theta_hat=self.theta_hat.copy(),
            count=self.count,
        )


def _check_vector(state: RidgeState, a) -> np.ndarray:
    a = np.asarray(a, dtype=float)
    if a.shape != (state.dim,):
        raise ValueError(f"expected a vector of dimension {state.dim}, got shape {a.shape}")
    return a


def cholesky_factor(m) -> np.ndarray:
    """Lower-triangular ``L`` with ``L @ L.T == m``.

    Raises :class:`NotPositiveDefiniteError` when a pivot is not positive.
    """
    m = np.asarray(m, dtype=float)
    if m.ndim != 2 or m.shape[0] != m.shape[1] or m.shape[0] < 1:
        raise ValueError(f"expected a non-empty square matrix, got shape {m.shape}")
    if np.abs(m - m.T).max() > SYMMETRY_TOL:
        raise ValueError("matrix is not symmetric")
    try:
        return np.linalg.cholesky(m)
    except np.linalg.LinAlgError as exc:
        raise NotPositiveDefiniteError("matrix is not positive definite") from exc


def mahalanobis_sq(state: RidgeState, a) -> float:
    """``a^T cov a``, the squared norm of ``a`` under the current covariance."""
    a = _check_vector(state, a)
    return max(float(a @ state.cov @ a), 0.0)


def refactor(state: RidgeState) -> None:
    """Recompute ``cov`` from ``inv_cov`` by Cholesky, in place."""
    try:
        factor = cho_factor(state.inv_cov, lower=True, check_finite=False)
    except np.linalg.LinAlgError as exc:
        raise NotPositiveDefiniteError("precision matrix lost positive definiteness") from exc
    cov = cho_solve(factor, np.eye(state.dim), check_finite=False)
    state.cov = np.ascontiguousarray(0.5 * (cov + cov.T))


def posterior_update(state: RidgeState, a, reward: float, in_place: bool = False) -> RidgeState:
    """Fold one observation ``(a, reward)`` into the state.

    Precision gains ``a a^T / sigma^2``; the covariance gets the matching
    rank-1 downdate and the mean becomes
    ``cov_new @ (inv_cov_old @ theta_hat + a * reward / sigma^2)``.
    Returns a new state unless ``in_place`` is set.
    """
    a = _check_vector(state, a)
    out = state if in_place else state.copy()
    s2 = out.sigma * out.sigma

    info = out.inv_cov @ out.theta_hat + a * (reward / s2)

    # dger writes through the Fortran-ordered transpose view (in place for
    # C-contiguous input). Scaling both vectors by 1/sqrt(denom) keeps the
    # downdate bitwise symmetric.
    out.inv_cov = blas.dger(1.0 / s2, a, a, a=out.inv_cov.T, overwrite_a=True).T
    u = out.cov @ a
    denom = s2 + float(a @ u)
    v = u / np.sqrt(denom)
    out.cov = blas.dger(-1.0, v, v, a=out.cov.T, overwrite_a=True).T

    out.count += 1
    if out.count % REFACTOR_EVERY == 0:
        refactor(out)
    if not in_place:
        out.cov = 0.5 * (out.cov + out.cov.T)
    out.theta_hat = out.cov @ info
    return out


def sample_posterior(state: RidgeState, inflation: float, rng: np.random.Generator, size: int | None = None):
    """Draw from ``N(theta_hat, inflation^2 * cov)``.

    With ``size`` given, returns a ``(size, dim)`` array of independent draws.
    """
    if inflation < 0:
        raise ValueError(f"inflation must be non-negative, got {inflation}")
    if inflation == 0:
        if size is None:
            return state.theta_hat.copy()
        return np.tile(state.theta_hat, (size, 1))
    try:
        chol = np.linalg.cholesky(state.cov)
    except np.linalg.LinAlgError as exc:
        raise NotPositiveDefiniteError("covariance lost positive definiteness") from exc
    if size is None:
        z = rng.standard_normal(state.dim)
        return state.theta_hat + inflation * (chol @ z)
    z = rng.standard_normal((size, state.dim))
    return state.theta_hat + inflation * (z @ chol.T)
