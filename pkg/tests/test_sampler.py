"""Tests for leapfrog integration, NUTS transitions, and multi-chain runs."""

import numpy as np
import pytest
from scipy import stats

from toolwear.errors import SamplingError
from toolwear.sampler import (
    DualAveraging,
    GaussianTarget,
    find_reasonable_step_size,
    leapfrog,
    nuts_transition,
    run_chains,
)


def std_normal_grad(x):
    return -x


def std_normal_logp_grad(x):
    return -0.5 * float(x @ x), -x


def standard_target(dim):
    return GaussianTarget(np.zeros(dim), np.eye(dim))


class TestLeapfrog:
    def test_free_particle(self):
        q = np.array([1.0, -2.0])
        p = np.array([0.5, 3.0])
        q2, p2 = leapfrog(q, p, 0.25, lambda x: np.zeros_like(x))
        assert np.allclose(q2, q + 0.25 * p)
        assert np.allclose(p2, p)

    def test_energy_conservation_on_gaussian(self):
        q, p = np.array([1.0]), np.array([0.7])
        h0 = 0.5 * float(q @ q) + 0.5 * float(p @ p)
        for _ in range(1000):
            q, p = leapfrog(q, p, 0.1, std_normal_grad)
        h1 = 0.5 * float(q @ q) + 0.5 * float(p @ p)
        assert abs(h1 - h0) < 0.01

    def test_reversibility(self):
        rng = np.random.default_rng(2)
        q0, p0 = rng.normal(size=(2, 3))
        q, p = q0.copy(), p0.copy()
        for _ in range(25):
            q, p = leapfrog(q, p, 0.1, std_normal_grad)
        p = -p
        for _ in range(25):
            q, p = leapfrog(q, p, 0.1, std_normal_grad)
        assert np.allclose(q, q0, atol=1e-12)
        assert np.allclose(-p, p0, atol=1e-12)

    def test_volume_preservation(self):
        """Numerical Jacobian of one step has |det| = 1 on random 2-D states."""
        rng = np.random.default_rng(4)
        eps, h = 0.2, 1e-6

        def step(z):
            q, p = leapfrog(z[:2], z[2:], eps, std_normal_grad)
            return np.concatenate([q, p])

        for _ in range(10):
            z = rng.normal(size=4)
            jac = np.column_stack([
                (step(z + h * e) - step(z - h * e)) / (2 * h)
                for e in np.eye(4)
            ])
            assert abs(abs(np.linalg.det(jac)) - 1.0) < 1e-6


class TestNutsTransition:
    def test_depth_zero_is_single_leapfrog(self):
        """At max_tree_depth=0 the only candidate is one leapfrog step away."""
        rng = np.random.default_rng(6)
        moved = 0
        for _ in range(50):
            q = rng.normal(size=2)
            q2, info = nuts_transition(q, std_normal_logp_grad, 0.5, rng,
                                       max_tree_depth=0)
            assert info["n_steps"] == 1
            assert info["depth"] <= 1
            moved += not np.array_equal(q2, q)
        # a healthy fraction of single proposals is accepted on this easy target
        assert moved > 10

    def test_gaussian_marginals(self):
        rng = np.random.default_rng(8)
        q = np.zeros(10)
        draws = np.empty((4000, 10))
        for i in range(len(draws)):
            q, _ = nuts_transition(q, std_normal_logp_grad, 0.4, rng,
                                   max_tree_depth=8)
            draws[i] = q
        se = draws.std(axis=0, ddof=1) / np.sqrt(len(draws) / 10)  # crude ESS guess
        assert np.all(np.abs(draws.mean(axis=0)) < 3 * se)
        cov = np.cov(draws.T)
        assert np.allclose(cov, np.eye(10), atol=0.12)

    def test_correlated_gaussian(self):
        rho = 0.9
        target = GaussianTarget(np.zeros(2), np.array([[1.0, rho], [rho, 1.0]]))
        rng = np.random.default_rng(10)
        q = np.zeros(2)
        draws = np.empty((10000, 2))
        for i in range(len(draws)):
            q, _ = nuts_transition(q, target.logp_grad, 0.25, rng, max_tree_depth=8)
            draws[i] = q
        assert abs(np.corrcoef(draws.T)[0, 1] - rho) < 0.05

    def test_divergence_flagged_on_bad_step(self):
        def sharp(x):
            return -0.5e8 * float(x @ x), -1e8 * x

        rng = np.random.default_rng(12)
        _, info = nuts_transition(np.array([1.0]), sharp, 1.0, rng, max_tree_depth=5)
        assert info["divergent"]


class TestDualAveraging:
    def test_fixed_point_at_target(self):
        da = DualAveraging(0.5, target_accept=0.8)
        for _ in range(500):
            da.update(0.8)
        first = da.adapted_step_size
        for _ in range(500):
            da.update(0.8)
        assert abs(np.log(da.adapted_step_size) - np.log(first)) < 0.05

    def test_all_rejects_shrink_step(self):
        da = DualAveraging(0.5, target_accept=0.8)
        steps = [da.update(0.0) for _ in range(20)]
        assert all(a > b for a, b in zip(steps, steps[1:]))

    def test_reasonable_step_size_positive(self):
        rng = np.random.default_rng(12)
        eps = find_reasonable_step_size(std_normal_logp_grad, np.zeros(5),
                                        rng, np.ones(5))
        assert 0 < eps < 16


class TestRunChains:
    def test_requires_two_chains(self):
        with pytest.raises(SamplingError):
            run_chains(standard_target(3), n_chains=1, n_warmup=10, n_samples=10)

    def test_gaussian_psrf_and_acceptance(self):
        chains = run_chains(standard_target(5), n_chains=4, n_warmup=400,
                            n_samples=400, seed=0)
        from toolwear.diagnostics import psrf
        for j in range(5):
            assert psrf(chains.draws[:, :, j]) < 1.01
        assert np.all(chains.divergences == 0)
        assert np.all((chains.accept_stats > 0.6) & (chains.accept_stats <= 1.0))

    def test_same_seed_bit_identical(self):
        a = run_chains(standard_target(3), n_chains=2, n_warmup=100, n_samples=100, seed=42)
        b = run_chains(standard_target(3), n_chains=2, n_warmup=100, n_samples=100, seed=42)
        assert np.array_equal(a.draws, b.draws)
        assert np.array_equal(a.step_sizes, b.step_sizes)

    def test_different_seeds_agree_in_mean(self):
        a = run_chains(standard_target(3), n_chains=2, n_warmup=300, n_samples=500, seed=1)
        b = run_chains(standard_target(3), n_chains=2, n_warmup=300, n_samples=500, seed=2)
        for j in range(3):
            _, p = stats.ttest_ind(a.flat()[::10, j], b.flat()[::10, j])
            assert p > 0.001

    def test_marginal_distribution_ks(self):
        """Empirical CDF of thinned 1-D draws matches the standard normal."""
        chains = run_chains(standard_target(1), n_chains=2, n_warmup=500,
                            n_samples=5000, seed=7)
        thinned = chains.flat()[::5, 0]
        _, p = stats.kstest(thinned, "norm")
        assert p > 0.01

    def test_nonzero_mean_target_recovered(self):
        target = GaussianTarget(np.array([3.0, -1.0]), np.diag([4.0, 0.25]))
        chains = run_chains(target, n_chains=2, n_warmup=400, n_samples=1000, seed=5)
        flat = chains.flat()
        assert np.allclose(flat.mean(axis=0), [3.0, -1.0], atol=0.15)
        assert np.allclose(flat.std(axis=0), [2.0, 0.5], rtol=0.1)

    def test_chainset_shape_and_names(self):
        chains = run_chains(standard_target(4), n_chains=3, n_warmup=50, n_samples=60, seed=3)
        assert chains.draws.shape == (3, 60, 4)
        assert chains.n_retained == 60
        assert len(chains.param_names) == 4
        assert chains.column(chains.param_names[2]).shape == (3, 60)
