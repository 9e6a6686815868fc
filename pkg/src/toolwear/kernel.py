"""Squared-exponential autocovariance over the (cutting speed, feed rate) plane.

Off-diagonal covariance between experiments m and n is
``eta_sq * exp(-rho1*(V_m - V_n)^2 - rho2*(f_m - f_n)^2)``; the diagonal adds
the replicate-variance nugget ``sigma_b_sq``. Control inputs are z-scored
before kernel evaluation (see :class:`Standardizer`), so the length-scale
parameters are interpreted on the standardized scale.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg import cholesky, LinAlgError

from .errors import DomainError, NotPositiveDefiniteError

JITTER_START = 1e-10
JITTER_MAX = 1e-4


@dataclass(frozen=True)
class KernelConfig:
    """Hyperparameters: signal variance, per-axis inverse squared length scales, nugget."""

    eta_sq: float
    rho1: float
    rho2: float
    sigma_b_sq: float

    def __post_init__(self):
        for name in ("eta_sq", "rho1", "rho2", "sigma_b_sq"):
            if not getattr(self, name) > 0:
                raise DomainError(f"{name} must be strictly positive")


@dataclass(frozen=True)
class Standardizer:
    """Z-scoring transform for (v_c, f) pairs, fitted on the training controls."""

    mean: np.ndarray
    sd: np.ndarray

    @classmethod
    def fit(cls, points: np.ndarray) -> "Standardizer":
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        mean = pts.mean(axis=0)
        sd = pts.std(axis=0)
        sd = np.where(sd > 0, sd, 1.0)  # single or coincident points
        return cls(mean=mean, sd=sd)

    def transform(self, points: np.ndarray) -> np.ndarray:
        return (np.atleast_2d(np.asarray(points, dtype=float)) - self.mean) / self.sd


def _sq_dists(a: np.ndarray, b: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    a = np.atleast_2d(np.asarray(a, dtype=float))
    b = np.atleast_2d(np.asarray(b, dtype=float))
    dv = a[:, 0:1] - b[None, :, 0]
    df = a[:, 1:2] - b[None, :, 1]
    return dv**2, df**2


def kernel_eval(a, b, cfg: KernelConfig) -> float:
    """Covariance between two control points; no nugget."""
    a = np.asarray(a, dtype=float).ravel()
    b = np.asarray(b, dtype=float).ravel()
    return float(
        cfg.eta_sq * np.exp(-cfg.rho1 * (a[0] - b[0]) ** 2 - cfg.rho2 * (a[1] - b[1]) ** 2)
    )


def cross_cov(stars: np.ndarray, train: np.ndarray, cfg: KernelConfig) -> np.ndarray:
    """M x K covariance between prediction and training points; never nugget."""
    dv2, df2 = _sq_dists(stars, train)
    return cfg.eta_sq * np.exp(-cfg.rho1 * dv2 - cfg.rho2 * df2)


def cov_matrix(points: np.ndarray, cfg: KernelConfig, jitter: float = 0.0) -> np.ndarray:
    """K x K training covariance: kernel off the diagonal, nugget + jitter on it."""
    if jitter < 0:
        raise DomainError("jitter must be >= 0")
    cov = cross_cov(points, points, cfg)
    cov[np.diag_indices_from(cov)] = cfg.eta_sq + cfg.sigma_b_sq + jitter
    return cov


def cholesky_cov(
    points: np.ndarray, cfg: KernelConfig, jitter: float | None = None
) -> tuple[np.ndarray, float]:
    """Lower Cholesky factor of :func:`cov_matrix`, escalating jitter on failure.

    Jitter starts at ``1e-10 * eta_sq`` and grows tenfold up to ``1e-4 * eta_sq``
    before raising; near-duplicate design points can make the matrix
    numerically singular.
    """
    jit = JITTER_START * cfg.eta_sq if jitter is None else jitter
    limit = JITTER_MAX * cfg.eta_sq
    while True:
        try:
            chol = cholesky(cov_matrix(points, cfg, jitter=jit), lower=True)
            return chol, jit
        except LinAlgError:
            if jitter is not None or jit >= limit:
                raise NotPositiveDefiniteError(
                    f"covariance not positive definite at jitter={jit:g}"
                ) from None
            jit = max(jit * 10.0, JITTER_START * cfg.eta_sq)
