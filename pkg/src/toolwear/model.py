"""Hierarchical force model: per-experiment linear wear trends tied by a GP.

Likelihood: F_ij = alpha_i + beta_i * L_ij + eps_ij with eps_ij ~ N(0, sigma_i^2).
The slopes beta get a GP prior over the standardized (v_c, f) plane with
constant mean mu_beta; the intercepts alpha are regularized by a shared
normal; hyperparameters carry Half-Cauchy / normal priors on the scales
stated in :class:`PriorConfig`.

Positive quantities are handled internally on the log scale (with the
log-Jacobian terms included in the prior), so densities and gradients are
defined over a fully unconstrained vector. Two parameterizations of the
slopes are supported: the default ``centered`` form carries beta directly
(the slopes here are strongly identified by the long force series, which
makes this the well-conditioned choice); the non-centered form carries
whitened coordinates z with ``beta = mu_beta + chol(Sigma) @ z`` and is the
better option when the per-experiment series are short or noisy.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import solve_triangular

from .errors import InsufficientDataError, InvalidDataError, NotPositiveDefiniteError
from .kernel import JITTER_MAX, JITTER_START, KernelConfig, Standardizer

LOG_2PI = math.log(2.0 * math.pi)


@dataclass
class ExperimentRecord:
    """One turning test: control settings, per-channel force series, optional life."""

    id: int
    v_c: float
    f: float
    length: np.ndarray | None = None
    forces: dict[str, np.ndarray] = field(default_factory=dict)
    tool_life: float | None = None

    def __post_init__(self):
        if self.length is not None:
            self.length = np.asarray(self.length, dtype=float)
            if len(self.length) < 2:
                raise InsufficientDataError(f"experiment {self.id}: need >= 2 measurements")
            if not np.all(np.diff(self.length) > 0):
                raise InvalidDataError(f"experiment {self.id}: L must be strictly increasing")
            self.forces = {k: np.asarray(v, dtype=float) for k, v in self.forces.items()}
            for k, v in self.forces.items():
                if len(v) != len(self.length):
                    raise InvalidDataError(f"experiment {self.id}: channel {k} length mismatch")
                if not np.all(np.isfinite(v)):
                    raise InvalidDataError(f"experiment {self.id}: non-finite force in {k}")

    @property
    def control(self) -> np.ndarray:
        return np.array([self.v_c, self.f])


@dataclass
class ModelParams:
    """Full latent state for one force channel (constrained scale)."""

    alpha: np.ndarray
    beta: np.ndarray
    sigma: np.ndarray
    mu_alpha: float
    sigma_alpha: float
    mu_beta: float
    kernel: KernelConfig

    def __post_init__(self):
        self.alpha = np.asarray(self.alpha, dtype=float)
        self.beta = np.asarray(self.beta, dtype=float)
        self.sigma = np.asarray(self.sigma, dtype=float)
        if np.any(self.sigma <= 0) or self.sigma_alpha <= 0:
            raise InvalidDataError("scale parameters must be strictly positive")


@dataclass(frozen=True)
class PriorConfig:
    """Scales of the weakly informative priors (on variances, as stated)."""

    sigma_sq_scale: float = 10.0      # sigma_i^2 ~ Half-Cauchy(0, 10)
    mu_alpha_sd: float = 10.0         # mu_alpha ~ N(0, 10^2)
    sigma_alpha_sq_scale: float = 10.0
    mu_beta_sd: float = 10.0
    sigma_b_sq_scale: float = 5.0
    eta_sq_scale: float = 5.0
    inv_rho_scale: float = 5.0        # rho_k^{-1} ~ Half-Cauchy(0, 5)


def half_cauchy_logpdf(x: float, scale: float) -> float:
    """log of 2 / (pi * s * (1 + (x/s)^2)) for x > 0."""
    return math.log(2.0) - math.log(math.pi) - math.log(scale) - math.log1p((x / scale) ** 2)


def controls_array(records: list[ExperimentRecord]) -> np.ndarray:
    return np.array([[r.v_c, r.f] for r in records], dtype=float)


# ---------------------------------------------------------------------------
# density over the unconstrained space

class ForceChannelModel:
    """Log-posterior and analytic gradient for one force channel.

    Unconstrained layout (K experiments, dim = 3K + 7)::

        [ alpha(K) | beta-or-z(K) | log sigma_i^2 (K) |
          mu_alpha | log sigma_alpha^2 | mu_beta |
          log eta^2 | log rho1 | log rho2 | log sigma_b^2 ]
    """

    def __init__(
        self,
        records: list[ExperimentRecord],
        channel: str = "Ft",
        priors: PriorConfig | None = None,
        centered: bool = True,
        standardizer: Standardizer | None = None,
    ):
        if channel not in {"Ft", "Ff", "Fp"}:
            raise InvalidDataError(f"unknown channel {channel!r}")
        self.records = records
        self.channel = channel
        self.priors = priors or PriorConfig()
        self.centered = centered
        self.K = len(records)
        if self.K < 1:
            raise InvalidDataError("need at least one experiment")

        self.L = np.concatenate([r.length for r in records])
        self.F = np.concatenate([r.forces[channel] for r in records])
        if not (np.all(np.isfinite(self.L)) and np.all(np.isfinite(self.F))):
            raise InvalidDataError("non-finite measurements")
        self.n_per_exp = np.array([len(r.length) for r in records])
        self.exp_index = np.repeat(np.arange(self.K), self.n_per_exp)

        self.standardizer = standardizer or Standardizer.fit(controls_array(records))
        x = self.standardizer.transform(controls_array(records))
        self.dv2 = (x[:, 0:1] - x[None, :, 0]) ** 2
        self.df2 = (x[:, 1:2] - x[None, :, 1]) ** 2

    # -- layout ------------------------------------------------------------

    @property
    def dim(self) -> int:
        return 3 * self.K + 7

    @property
    def param_names(self) -> list[str]:
        K = self.K
        names = [f"alpha[{i+1}]" for i in range(K)]
        names += [f"beta[{i+1}]" for i in range(K)]
        names += [f"sigma[{i+1}]" for i in range(K)]
        names += ["mu_alpha", "sigma_alpha", "mu_beta",
                  "eta_sq", "rho1", "rho2", "sigma_b_sq"]
        return names

    def _split(self, u: np.ndarray):
        K = self.K
        return (u[:K], u[K:2 * K], u[2 * K:3 * K], u[3 * K], u[3 * K + 1],
                u[3 * K + 2], u[3 * K + 3], u[3 * K + 4], u[3 * K + 5], u[3 * K + 6])

    def _chol_sigma(self, eta_sq, rho1, rho2, sigma_b_sq):
        """GP covariance over standardized controls, its Cholesky factor, and jitter."""
        e_mat = np.exp(-rho1 * self.dv2 - rho2 * self.df2)
        jit = JITTER_START * eta_sq
        limit = JITTER_MAX * eta_sq
        while True:
            cov = eta_sq * e_mat
            cov[np.diag_indices_from(cov)] = eta_sq + sigma_b_sq + jit
            try:
                return e_mat, cov, np.linalg.cholesky(cov), jit
            except np.linalg.LinAlgError:
                if jit >= limit:
                    raise NotPositiveDefiniteError(
                        f"GP covariance not positive definite at jitter={jit:g}"
                    ) from None
                jit *= 10.0

    # -- density + gradient --------------------------------------------------

    def logp_grad(self, u: np.ndarray) -> tuple[float, np.ndarray]:
        """Joint unnormalized log density and its gradient at ``u``."""
        K = self.K
        pri = self.priors
        u = np.asarray(u, dtype=float)
        # overflow guard: far-out leapfrog excursions land here and must read
        # as -inf energy rather than raise
        if not np.all(np.isfinite(u)) or np.max(np.abs(u[2 * K:])) > 300.0:
            return -math.inf, np.zeros_like(u)
        a, b_raw, t_s, m_a, t_a, m_b, t_e, t_r1, t_r2, t_b = self._split(u)
        sig_sq = np.exp(t_s)
        sa_sq = math.exp(t_a)
        eta_sq, rho1, rho2 = math.exp(t_e), math.exp(t_r1), math.exp(t_r2)
        sb_sq = math.exp(t_b)

        e_mat, cov, chol, jit = self._chol_sigma(eta_sq, rho1, rho2, sb_sq)
        if self.centered:
            beta = b_raw
        else:
            beta = m_b + chol @ b_raw

        grad = np.zeros_like(u)

        # likelihood
        r = self.F - a[self.exp_index] - beta[self.exp_index] * self.L
        ssr = np.bincount(self.exp_index, weights=r * r, minlength=K)
        logp = -0.5 * self.n_per_exp.sum() * LOG_2PI \
            - 0.5 * float(self.n_per_exp @ t_s) - 0.5 * float(np.sum(ssr / sig_sq))
        g_a = np.bincount(self.exp_index, weights=r, minlength=K) / sig_sq
        g_beta = np.bincount(self.exp_index, weights=r * self.L, minlength=K) / sig_sq
        grad[2 * K:3 * K] = -0.5 * self.n_per_exp + 0.5 * ssr / sig_sq

        # alpha level: alpha_i ~ N(mu_alpha, sigma_alpha^2)
        da = a - m_a
        logp += -0.5 * K * (LOG_2PI + t_a) - 0.5 * float(da @ da) / sa_sq
        grad[:K] = g_a - da / sa_sq
        grad[3 * K] = float(np.sum(da)) / sa_sq
        grad[3 * K + 1] = -0.5 * K + 0.5 * float(da @ da) / sa_sq

        # GP level on the slopes. Gradients w.r.t. the kernel hyperparameters
        # are assembled as sum(dSigma/dtheta * S) for a single adjoint matrix
        # S, so the four parameters share two triangular solves.
        i_e, i_r1, i_r2, i_b = 3 * K + 3, 3 * K + 4, 3 * K + 5, 3 * K + 6
        if self.centered:
            q = solve_triangular(chol, beta - m_b, lower=True, check_finite=False)
            v = solve_triangular(chol, q, lower=True, trans="T", check_finite=False)
            logp += -float(np.sum(np.log(np.diag(chol)))) - 0.5 * float(q @ q) \
                - 0.5 * K * LOG_2PI
            grad[K:2 * K] = g_beta - v
            grad[3 * K + 2] = float(np.sum(v))
            cov_inv = solve_triangular(chol, np.eye(K), lower=True, check_finite=False)
            cov_inv = cov_inv.T @ cov_inv
            s_adj = 0.5 * (np.outer(v, v) - cov_inv)
        else:
            z = b_raw
            logp += -0.5 * float(z @ z) - 0.5 * K * LOG_2PI
            grad[K:2 * K] = chol.T @ g_beta - z
            grad[3 * K + 2] = float(np.sum(g_beta))
            # d(g_beta . L z)/dSigma through dL = L Phi(L^-1 dS L^-T) reduces
            # to sum(dS * L^-T Phi-mask(w z^T) L^-1) with w = L^T g_beta
            m_adj = np.tril(np.outer(chol.T @ g_beta, z))
            m_adj[np.diag_indices_from(m_adj)] *= 0.5
            s_adj = solve_triangular(chol, m_adj, lower=True, trans="T", check_finite=False)
            s_adj = solve_triangular(chol, s_adj.T, lower=True, trans="T", check_finite=False).T
        es = e_mat * s_adj
        tr_s = float(np.trace(s_adj))
        grad[i_e] += eta_sq * float(np.sum(es)) + jit * tr_s
        grad[i_r1] += -rho1 * eta_sq * float(np.sum(self.dv2 * es))
        grad[i_r2] += -rho2 * eta_sq * float(np.sum(self.df2 * es))
        grad[i_b] += sb_sq * tr_s

        # hyperpriors (Half-Cauchy on variances, normals on means), with
        # log-Jacobians of the log-scale transform folded in
        def hc_log_exp(t, x, scale):
            # x = exp(t) ~ HC(scale); returns (logpdf + jacobian, d/dt)
            lp = half_cauchy_logpdf(x, scale) + t
            return lp, 1.0 - 2.0 * x * x / (scale * scale + x * x)

        for ts_i, ss_i, slot in zip(t_s, sig_sq, range(2 * K, 3 * K)):
            lp_i, dlp_i = hc_log_exp(ts_i, ss_i, pri.sigma_sq_scale)
            logp += lp_i
            grad[slot] += dlp_i
        for t, x, scale, slot in (
            (t_a, sa_sq, pri.sigma_alpha_sq_scale, 3 * K + 1),
            (t_e, eta_sq, pri.eta_sq_scale, i_e),
            (t_b, sb_sq, pri.sigma_b_sq_scale, i_b),
        ):
            lp_t, dlp_t = hc_log_exp(t, x, scale)
            logp += lp_t
            grad[slot] += dlp_t
        # rho_k^{-1} ~ Half-Cauchy: x = exp(-t), jacobian |dx/dt| = x
        for t, rho, slot in ((t_r1, rho1, i_r1), (t_r2, rho2, i_r2)):
            x = 1.0 / rho
            s = pri.inv_rho_scale
            logp += half_cauchy_logpdf(x, s) - t
            grad[slot] += 2.0 * x * x / (s * s + x * x) - 1.0

        # normal priors on the means
        logp += -0.5 * (LOG_2PI + 2.0 * math.log(pri.mu_alpha_sd)) \
            - 0.5 * m_a * m_a / pri.mu_alpha_sd**2
        grad[3 * K] += -m_a / pri.mu_alpha_sd**2
        logp += -0.5 * (LOG_2PI + 2.0 * math.log(pri.mu_beta_sd)) \
            - 0.5 * m_b * m_b / pri.mu_beta_sd**2
        grad[3 * K + 2] += -m_b / pri.mu_beta_sd**2

        return logp, grad

    def logp(self, u: np.ndarray) -> float:
        return self.logp_grad(u)[0]

    # -- transforms ----------------------------------------------------------

    def constrain(self, u: np.ndarray) -> np.ndarray:
        """Map an unconstrained state to the reported constrained vector."""
        K = self.K
        a, b_raw, t_s, m_a, t_a, m_b, t_e, t_r1, t_r2, t_b = self._split(u)
        eta_sq, rho1, rho2 = math.exp(t_e), math.exp(t_r1), math.exp(t_r2)
        sb_sq = math.exp(t_b)
        if self.centered:
            beta = b_raw
        else:
            _, _, chol, _ = self._chol_sigma(eta_sq, rho1, rho2, sb_sq)
            beta = m_b + chol @ b_raw
        return np.concatenate([
            a, beta, np.exp(0.5 * t_s),
            [m_a, math.exp(0.5 * t_a), m_b, eta_sq, rho1, rho2, sb_sq],
        ])

    def unconstrain(self, params: ModelParams) -> np.ndarray:
        """Inverse of :meth:`constrain` (centered parameterization only)."""
        if not self.centered:
            raise InvalidDataError("unconstrain is defined for the centered parameterization")
        k = params.kernel
        return np.concatenate([
            params.alpha, params.beta, 2.0 * np.log(params.sigma),
            [params.mu_alpha, 2.0 * math.log(params.sigma_alpha), params.mu_beta,
             math.log(k.eta_sq), math.log(k.rho1), math.log(k.rho2),
             math.log(k.sigma_b_sq)],
        ])

    def params_from_constrained(self, c: np.ndarray) -> ModelParams:
        K = self.K
        return ModelParams(
            alpha=c[:K], beta=c[K:2 * K], sigma=c[2 * K:3 * K],
            mu_alpha=c[3 * K], sigma_alpha=c[3 * K + 1], mu_beta=c[3 * K + 2],
            kernel=KernelConfig(c[3 * K + 3], c[3 * K + 4], c[3 * K + 5], c[3 * K + 6]),
        )


def _chol_diff(chol: np.ndarray, d_cov: np.ndarray) -> np.ndarray:
    """Forward-mode derivative of the Cholesky factor: dL = L * Phi(L^-1 dS L^-T)."""
    tmp = solve_triangular(chol, d_cov, lower=True)
    tmp = solve_triangular(chol, tmp.T, lower=True).T
    phi = np.tril(tmp)
    phi[np.diag_indices_from(phi)] *= 0.5
    return chol @ phi


# ---------------------------------------------------------------------------
# standalone density functions on the constrained scale

def log_likelihood(params: ModelParams, records: list[ExperimentRecord], channel: str) -> float:
    """Sum of Gaussian log densities of the per-experiment linear fits."""
    total = 0.0
    for i, rec in enumerate(records):
        f = rec.forces[channel]
        if not np.all(np.isfinite(f)):
            raise InvalidDataError(f"experiment {rec.id}: non-finite force data")
        r = f - params.alpha[i] - params.beta[i] * rec.length
        s2 = params.sigma[i] ** 2
        total += -0.5 * len(f) * (LOG_2PI + math.log(s2)) - 0.5 * float(r @ r) / s2
    return total


def log_prior(
    params: ModelParams,
    records: list[ExperimentRecord],
    priors: PriorConfig | None = None,
    standardizer: Standardizer | None = None,
) -> float:
    """GP density of the slopes + alpha regularization + hyperpriors.

    Includes the log-Jacobian terms of the internal log-scale parameterization
    of the positive parameters, so ``log_likelihood + log_prior`` equals the
    (centered) sampler target exactly.
    """
    pri = priors or PriorConfig()
    K = len(records)
    controls = controls_array(records)
    std = standardizer or Standardizer.fit(controls)
    x = std.transform(controls)
    ker = params.kernel

    dv2 = (x[:, 0:1] - x[None, :, 0]) ** 2
    df2 = (x[:, 1:2] - x[None, :, 1]) ** 2
    cov = ker.eta_sq * np.exp(-ker.rho1 * dv2 - ker.rho2 * df2)
    cov[np.diag_indices_from(cov)] = ker.eta_sq + ker.sigma_b_sq + JITTER_START * ker.eta_sq
    chol = np.linalg.cholesky(cov)
    q = solve_triangular(chol, params.beta - params.mu_beta, lower=True)
    total = -float(np.sum(np.log(np.diag(chol)))) - 0.5 * float(q @ q) - 0.5 * K * LOG_2PI

    da = params.alpha - params.mu_alpha
    sa_sq = params.sigma_alpha ** 2
    total += -0.5 * K * (LOG_2PI + math.log(sa_sq)) - 0.5 * float(da @ da) / sa_sq

    for s2 in params.sigma ** 2:
        total += half_cauchy_logpdf(s2, pri.sigma_sq_scale) + math.log(s2)
    total += half_cauchy_logpdf(sa_sq, pri.sigma_alpha_sq_scale) + math.log(sa_sq)
    total += half_cauchy_logpdf(ker.eta_sq, pri.eta_sq_scale) + math.log(ker.eta_sq)
    total += half_cauchy_logpdf(ker.sigma_b_sq, pri.sigma_b_sq_scale) + math.log(ker.sigma_b_sq)
    for rho in (ker.rho1, ker.rho2):
        total += half_cauchy_logpdf(1.0 / rho, pri.inv_rho_scale) + math.log(1.0 / rho)

    total += -0.5 * (LOG_2PI + 2.0 * math.log(pri.mu_alpha_sd)) \
        - 0.5 * params.mu_alpha ** 2 / pri.mu_alpha_sd ** 2
    total += -0.5 * (LOG_2PI + 2.0 * math.log(pri.mu_beta_sd)) \
        - 0.5 * params.mu_beta ** 2 / pri.mu_beta_sd ** 2
    return total


def log_posterior(
    params: ModelParams,
    records: list[ExperimentRecord],
    priors: PriorConfig | None = None,
    channel: str = "Ft",
) -> float:
    """Unnormalized joint log density: likelihood plus prior."""
    return log_likelihood(params, records, channel) + log_prior(params, records, priors)


def grad_log_posterior(
    params: ModelParams,
    records: list[ExperimentRecord],
    priors: PriorConfig | None = None,
    channel: str = "Ft",
) -> np.ndarray:
    """Analytic gradient over the centered unconstrained parameterization.

    Coordinates follow the layout documented on :class:`ForceChannelModel`,
    with beta raw and every positive parameter on the log scale.
    """
    model = ForceChannelModel(records, channel=channel, priors=priors, centered=True)
    return model.logp_grad(model.unconstrain(params))[1]
