"""Tests for GP prediction, response surfaces, tool life, and the Taylor fit."""

import math

import numpy as np
import pytest

from toolwear.errors import (
    DegenerateFitError,
    DomainError,
    ExtrapolationError,
    InsufficientDataError,
)
from toolwear.kernel import KernelConfig, cov_matrix, cross_cov
from toolwear.model import ExperimentRecord
from toolwear.predict import (
    SurfaceGrid,
    fit_taylor,
    gp_conditional,
    predictive_draws,
    surface,
    taylor_life,
)
from toolwear.sampler import ChainSet


def dense_conditional(beta, mu_beta, cfg, train, star, jitter=0.0):
    """Oracle: Gaussian conditional via an explicit matrix inverse."""
    cov = cov_matrix(train, cfg, jitter=jitter)
    inv = np.linalg.inv(cov)
    ks = cross_cov(np.atleast_2d(star), train, cfg)
    mean = mu_beta + ks @ inv @ (np.asarray(beta) - mu_beta)
    var = cfg.eta_sq + cfg.sigma_b_sq - np.einsum("ij,jk,ik->i", ks, inv, ks)
    return mean, var


def force_chainset(flat_rows, names, seed=0):
    """Pack explicit per-draw parameter rows into a 1-chain ChainSet."""
    draws = np.asarray(flat_rows, dtype=float)[None]
    return ChainSet(
        draws=draws, param_names=names, n_warmup=0, n_retained=draws.shape[1],
        seed=seed, accept_stats=np.array([0.9]),
        divergences=np.zeros(1, dtype=int),
    )


def model_chainset(k, beta_rows, hyper, mu_beta=2.0, seed=0):
    """ChainSet shaped like a force-channel fit with given beta and hypers."""
    names = ([f"alpha[{i + 1}]" for i in range(k)]
             + [f"beta[{i + 1}]" for i in range(k)]
             + [f"sigma[{i + 1}]" for i in range(k)]
             + ["mu_alpha", "sigma_alpha", "mu_beta", "eta_sq", "rho1", "rho2",
                "sigma_b_sq"])
    rows = []
    for beta in beta_rows:
        rows.append(np.concatenate([np.full(k, 200.0), beta, np.full(k, 5.0),
                                    [200.0, 10.0, mu_beta], hyper]))
    return force_chainset(rows, names, seed=seed)


class TestGpConditional:
    def test_noiseless_interpolation(self):
        cfg = KernelConfig(eta_sq=2.0, rho1=1.0, rho2=1.0, sigma_b_sq=1e-12)
        train = np.array([[0.0, 0.0], [1.0, 0.5], [0.2, 1.3]])
        beta = np.array([1.0, -0.5, 2.0])
        for i in range(3):
            mean, var = gp_conditional(beta, 0.3, cfg, train, train[i], jitter=0.0)
            assert mean == pytest.approx(beta[i], abs=1e-6)
            assert var == pytest.approx(0.0, abs=1e-8)

    def test_prior_reversion_far_away(self):
        cfg = KernelConfig(eta_sq=2.0, rho1=1.0, rho2=1.0, sigma_b_sq=0.3)
        train = np.array([[0.0, 0.0], [1.0, 1.0]])
        mean, var = gp_conditional(np.array([5.0, -5.0]), 0.7, cfg, train,
                                   np.array([100.0, 100.0]), jitter=0.0)
        assert mean == pytest.approx(0.7, abs=1e-12)
        assert var == pytest.approx(cfg.eta_sq + cfg.sigma_b_sq, abs=1e-12)

    def test_two_point_hand_system(self):
        """K=2 at unit distance: solve the 2x2 system by hand."""
        cfg = KernelConfig(eta_sq=1.0, rho1=1.0, rho2=1.0, sigma_b_sq=1.0)
        train = np.array([[0.0, 0.0], [1.0, 0.0]])
        beta = np.array([1.0, 2.0])
        star = np.array([0.0, 0.0])
        # cov = [[2, e^-1], [e^-1, 2]]; k* = [1, e^-1]
        e = math.exp(-1.0)
        det = 4.0 - e * e
        w = np.array([(2.0 - e * e) / det, e / det])  # k* @ inv(cov)
        mean_hand = w @ beta
        var_hand = 2.0 - (w @ np.array([1.0, e]))
        mean, var = gp_conditional(beta, 0.0, cfg, train, star, jitter=0.0)
        assert mean == pytest.approx(mean_hand, rel=1e-12)
        assert var == pytest.approx(var_hand, rel=1e-12)

    def test_matches_dense_inverse_oracle(self):
        rng = np.random.default_rng(31)
        for _ in range(50):
            k = int(rng.integers(1, 7))
            cfg = KernelConfig(*np.exp(rng.uniform(-1.5, 1.2, size=4)))
            train = rng.uniform(-2, 2, size=(k, 2))
            beta = rng.normal(size=k)
            stars = rng.uniform(-2, 2, size=(3, 2))
            mean, var = gp_conditional(beta, 0.4, cfg, train, stars, jitter=0.0)
            m2, v2 = dense_conditional(beta, 0.4, cfg, train, stars)
            assert np.allclose(mean, m2, atol=1e-8)
            assert np.allclose(var, np.maximum(v2, 0.0), atol=1e-8)

    def test_variance_bounds(self):
        rng = np.random.default_rng(33)
        cfg = KernelConfig(1.5, 0.8, 0.6, 0.2)
        train = rng.uniform(-1, 1, size=(6, 2))
        beta = rng.normal(size=6)
        stars = rng.uniform(-1.5, 1.5, size=(40, 2))
        _, var = gp_conditional(beta, 0.0, cfg, train, stars)
        assert np.all(var >= 0.0)
        assert np.all(var <= cfg.eta_sq + cfg.sigma_b_sq + 1e-12)

    def test_mean_affine_in_beta(self):
        """Conditioning on 2*beta - mu*1 mirrors the mean about reversion."""
        rng = np.random.default_rng(35)
        cfg = KernelConfig(1.0, 1.0, 1.0, 0.5)
        train = rng.uniform(-1, 1, size=(4, 2))
        beta = rng.normal(size=4)
        mu = 0.8
        star = np.array([0.3, -0.4])
        m1, _ = gp_conditional(beta, mu, cfg, train, star, jitter=0.0)
        m2, _ = gp_conditional(2 * beta - mu, mu, cfg, train, star, jitter=0.0)
        assert m2 - mu == pytest.approx(2 * (m1 - mu), rel=1e-10)


class TestPredictiveDraws:
    def test_law_of_total_variance(self):
        """Fixed hyperparameters: predictive variance = E[var] + var[mean]."""
        rng = np.random.default_rng(37)
        k = 4
        train = rng.uniform(-1, 1, size=(k, 2))
        hyper = [1.2, 0.9, 1.1, 0.2]
        cfg = KernelConfig(*hyper)
        beta_rows = rng.normal(2.0, 0.7, size=(4000, k))
        chains = model_chainset(k, beta_rows, hyper, seed=5)
        star = np.array([0.2, 0.1])
        draws = predictive_draws(chains, train, star)
        # replicate the implementation's z-scoring so the kernel sees the
        # same coordinates
        from toolwear.kernel import Standardizer
        std = Standardizer.fit(train)
        x_train = std.transform(train)
        x_star = std.transform(star[None])[0]
        cond = [gp_conditional(b, 2.0, cfg, x_train, x_star) for b in beta_rows]
        means = np.array([c[0] for c in cond])
        vars_ = np.array([c[1] for c in cond])
        expected = vars_.mean() + means.var()
        assert draws.var() == pytest.approx(expected, rel=0.1)

    def test_interpolation_limit(self):
        rng = np.random.default_rng(39)
        k = 3
        train = rng.uniform(-1, 1, size=(k, 2))
        hyper = [1.0, 1.0, 1.0, 1e-10]
        beta_rows = rng.normal(1.5, 0.05, size=(500, k))
        chains = model_chainset(k, beta_rows, hyper, seed=7)
        draws = predictive_draws(chains, train, train[1])
        assert draws.mean() == pytest.approx(beta_rows[:, 1].mean(), abs=0.02)

    def test_deterministic_given_chainset(self):
        rng = np.random.default_rng(41)
        k = 3
        train = rng.uniform(-1, 1, size=(k, 2))
        chains = model_chainset(k, rng.normal(size=(100, k)), [1.0, 1.0, 1.0, 0.1])
        star = np.array([0.0, 0.0])
        assert np.array_equal(predictive_draws(chains, train, star),
                              predictive_draws(chains, train, star))


class TestSurface:
    def make_chains(self, rng, train, n_draws=200):
        k = len(train)
        return model_chainset(k, rng.normal(2.0, 0.5, size=(n_draws, k)),
                              [1.0, 1.0, 1.0, 0.1])

    def test_default_grid_is_400_nodes(self):
        rng = np.random.default_rng(43)
        train = rng.uniform([20, 20], [60, 50], size=(6, 2))
        grid = surface(self.make_chains(rng, train), train)
        assert grid.n_nodes == 400
        assert grid.mean.shape == (20, 20)

    def test_two_by_two_grid_hits_corners(self):
        rng = np.random.default_rng(45)
        train = rng.uniform([20, 20], [60, 50], size=(5, 2))
        v0, v1 = train[:, 0].min(), train[:, 0].max()
        f0, f1 = train[:, 1].min(), train[:, 1].max()
        spec = (v0, v1, 2, f0, f1, 2)
        grid = surface(self.make_chains(rng, train), train, grid_spec=spec)
        assert grid.n_nodes == 4
        assert np.allclose(grid.v_axis, [v0, v1])
        assert np.allclose(grid.f_axis, [f0, f1])

    def test_sd_nonnegative_and_deterministic(self):
        rng = np.random.default_rng(47)
        train = rng.uniform([20, 20], [60, 50], size=(5, 2))
        chains = self.make_chains(rng, train)
        g1 = surface(chains, train)
        g2 = surface(chains, train)
        assert np.all(g1.sd >= 0.0)
        assert np.array_equal(g1.mean, g2.mean)
        assert np.array_equal(g1.sd, g2.sd)

    def test_extrapolation_guard(self):
        rng = np.random.default_rng(49)
        train = rng.uniform([30, 30], [50, 45], size=(5, 2))
        chains = self.make_chains(rng, train)
        spec = (10.0, 80.0, 5, 30.0, 45.0, 5)
        with pytest.raises(ExtrapolationError):
            surface(chains, train, grid_spec=spec)

    def test_resolution_must_be_at_least_two(self):
        rng = np.random.default_rng(51)
        train = rng.uniform([20, 20], [60, 50], size=(5, 2))
        chains = self.make_chains(rng, train)
        with pytest.raises(DomainError):
            surface(chains, train, grid_spec=(25.0, 55.0, 1, 25.0, 45.0, 5))


class TestToolLife:
    @staticmethod
    def life_records(settings, lives):
        records = []
        for i, ((v, f), life) in enumerate(zip(settings, lives), start=1):
            records.append(ExperimentRecord(
                id=i, v_c=v, f=f, length=np.array([1.0, 2.0]),
                forces={ch: np.array([0.0, 0.0]) for ch in ("Ft", "Ff", "Fp")},
                tool_life=float(life),
            ))
        return records

    def test_requires_three_lives(self):
        from toolwear.predict import fit_tool_life
        records = self.life_records([(20, 45), (58, 22.5)], [255.0, 10.0])
        with pytest.raises(InsufficientDataError):
            fit_tool_life(records, n_chains=2, n_warmup=10, n_samples=10)

    def test_constant_life_field(self):
        from toolwear.predict import fit_tool_life
        rng = np.random.default_rng(53)
        settings = rng.uniform([20, 20], [60, 50], size=(8, 2))
        records = self.life_records(settings, np.full(8, 50.0))
        chains, grid = fit_tool_life(records, n_chains=2, n_warmup=300,
                                     n_samples=300, seed=11)
        assert np.all(np.abs(grid.mean - 50.0) <= 3.0 * grid.sd + 1.0)

    def test_life_surface_spans_training_envelope(self):
        from toolwear.predict import fit_tool_life
        rng = np.random.default_rng(55)
        settings = rng.uniform([20, 20], [60, 50], size=(10, 2))
        lives = np.exp(np.log(255) - (settings[:, 0] - 20) / 40 * np.log(25.5))
        records = self.life_records(settings, lives)
        _, grid = fit_tool_life(records, n_chains=2, n_warmup=300,
                                n_samples=300, seed=13)
        lo = lives.min() - 3.0 * grid.sd.max()
        hi = lives.max() + 3.0 * grid.sd.max()
        assert np.all(grid.mean >= lo) and np.all(grid.mean <= hi)


class TestTaylor:
    def test_exact_recovery(self):
        n, c = 0.25, 100.0
        t = np.array([5.0, 20.0, 80.0, 200.0])
        v = c / t**n
        fit = fit_taylor(list(zip(v, t)))
        assert fit.n == pytest.approx(n, abs=1e-10)
        assert fit.C == pytest.approx(c, rel=1e-10)
        assert fit.residual_sd == pytest.approx(0.0, abs=1e-10)

    def test_two_point_closed_form(self):
        fit = fit_taylor([(20.0, 255.0), (58.0, 10.0)])
        n_hand = math.log(58.0 / 20.0) / math.log(255.0 / 10.0)
        assert fit.n == pytest.approx(n_hand, rel=1e-12)
        assert fit.C == pytest.approx(20.0 * 255.0**n_hand, rel=1e-12)

    def test_replicate_leaves_fit_unchanged(self):
        base = fit_taylor([(20.0, 255.0), (58.0, 10.0)])
        # replicating an endpoint only reweights; a 2-parameter line through
        # 2 distinct x-values is exact either way
        rep = fit_taylor([(20.0, 255.0), (58.0, 10.0), (58.0, 10.0)])
        assert rep.n == pytest.approx(base.n, rel=1e-12)
        assert rep.C == pytest.approx(base.C, rel=1e-12)

    def test_taylor_life_inverts_fit(self):
        fit = fit_taylor([(20.0, 255.0), (58.0, 10.0)])
        assert taylor_life(fit, 20.0) == pytest.approx(255.0, rel=1e-9)
        assert taylor_life(fit, 58.0) == pytest.approx(10.0, rel=1e-9)

    def test_domain_errors(self):
        with pytest.raises(DomainError):
            fit_taylor([(20.0, -5.0), (30.0, 10.0)])
        with pytest.raises(DomainError):
            fit_taylor([(0.0, 5.0), (30.0, 10.0)])
        with pytest.raises(InsufficientDataError):
            fit_taylor([(20.0, 255.0)])
        with pytest.raises(DegenerateFitError):
            fit_taylor([(30.0, 255.0), (30.0, 10.0)])
