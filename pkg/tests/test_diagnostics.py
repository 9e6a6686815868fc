"""Tests for the split-chain PSRF and posterior summaries."""

import numpy as np
import pytest

from toolwear.diagnostics import FitSummary, psrf, summarize
from toolwear.errors import InsufficientDataError
from toolwear.sampler import ChainSet


def hand_psrf(chains):
    """Independent split-chain PSRF on an (m, n) array, written out longhand."""
    m, n = chains.shape
    half = n // 2
    seqs = []
    for row in chains:
        seqs.append(row[:half])
        seqs.append(row[half:2 * half])
    seqs = np.asarray(seqs)
    w = np.mean([np.var(s, ddof=1) for s in seqs])
    b = half * np.var([s.mean() for s in seqs], ddof=1)
    var_plus = (half - 1) / half * w + b / half
    return float(max(1.0, np.sqrt(var_plus / w)))


def make_chainset(draws, names=None):
    draws = np.asarray(draws, dtype=float)
    m, n, k = draws.shape
    return ChainSet(
        draws=draws, param_names=names or [f"p{i}" for i in range(k)],
        n_warmup=0, n_retained=n, seed=0,
        accept_stats=np.full(m, 0.9), divergences=np.zeros(m, dtype=int),
    )


class TestPsrf:
    def test_matches_longhand_formula(self):
        rng = np.random.default_rng(1)
        for _ in range(50):
            m = int(rng.integers(2, 6))
            n = int(rng.integers(4, 60)) * 2
            chains = rng.normal(rng.uniform(-2, 2), rng.uniform(0.5, 3), size=(m, n))
            assert psrf(chains) == pytest.approx(hand_psrf(chains), abs=1e-12)

    def test_identical_chains_bound(self):
        rng = np.random.default_rng(3)
        row = rng.normal(size=1000)
        chains = np.vstack([row, row, row])
        assert psrf(chains) <= 1 + 2 / 1000

    def test_disjoint_levels_detected(self):
        rng = np.random.default_rng(5)
        a = 0.0 + 0.01 * rng.normal(size=500)
        b = 10.0 + 0.01 * rng.normal(size=500)
        assert psrf(np.vstack([a, b])) > 1.5

    def test_stationary_stream_near_one(self):
        rng = np.random.default_rng(7)
        chains = rng.normal(size=(4, 1000))
        assert psrf(chains) < 1.01

    def test_tends_to_one_with_length(self):
        rng = np.random.default_rng(9)
        values = []
        for n in (100, 1000, 10000):
            values.append(np.mean([
                psrf(rng.normal(size=(4, n))) for _ in range(20)
            ]))
        assert values[0] > values[1] > values[2]
        assert values[2] < 1.005

    def test_affine_invariance(self):
        rng = np.random.default_rng(11)
        chains = rng.normal(size=(3, 200))
        base = psrf(chains)
        assert psrf(-2.5 * chains + 7.0) == pytest.approx(base, rel=1e-12)

    def test_chain_permutation_symmetry(self):
        rng = np.random.default_rng(13)
        chains = rng.normal(size=(4, 100))
        base = psrf(chains)
        for perm in ([3, 1, 0, 2], [1, 0, 3, 2]):
            assert psrf(chains[perm]) == pytest.approx(base, rel=1e-14)

    def test_constant_chains_return_one(self):
        assert psrf(np.full((2, 100), 4.2)) == 1.0

    def test_never_below_one(self):
        rng = np.random.default_rng(15)
        for _ in range(100):
            chains = rng.normal(size=(2, int(rng.integers(4, 40))))
            assert psrf(chains) >= 1.0


class TestSummarize:
    def test_degenerate_distribution(self):
        cs = make_chainset(np.full((2, 50, 1), 3.25))
        s = summarize(cs)
        assert s.mean[0] == 3.25
        assert s.sd[0] == 0.0
        assert s.q2_5[0] == s.median[0] == s.q97_5[0] == 3.25

    def test_median_of_1_to_100(self):
        vals = np.arange(1.0, 101.0).reshape(2, 50, 1)
        s = summarize(make_chainset(vals))
        assert s.median[0] == pytest.approx(50.5)

    def test_gaussian_mean_within_mc_error(self):
        rng = np.random.default_rng(17)
        draws = rng.normal(size=(4, 500, 2))
        s = summarize(make_chainset(draws))
        se = 1.0 / np.sqrt(4 * 500)
        assert np.all(np.abs(s.mean) < 3 * se)

    def test_quantiles_ordered(self):
        rng = np.random.default_rng(19)
        s = summarize(make_chainset(rng.normal(size=(3, 200, 4))))
        assert np.all(s.q2_5 <= s.median)
        assert np.all(s.median <= s.q97_5)

    def test_flagging_and_worst(self):
        rng = np.random.default_rng(21)
        good = rng.normal(size=(2, 400))
        bad = np.vstack([rng.normal(size=400), 10 + rng.normal(size=400)])
        draws = np.stack([good, bad], axis=2)
        s = summarize(make_chainset(draws, names=["good", "bad"]))
        assert s.flagged(1.05) == ["bad"]
        assert s.worst_psrf() == pytest.approx(max(s.psrf))

    def test_empty_draws_raise(self):
        cs = make_chainset(np.empty((2, 0, 1)))
        with pytest.raises(InsufficientDataError):
            summarize(cs)

    def test_rows_align_with_fields(self):
        rng = np.random.default_rng(23)
        s = summarize(make_chainset(rng.normal(size=(2, 100, 3))))
        rows = list(s.rows())
        assert len(rows) == 3
        name, mean, sd, lo, med, hi, r = rows[1]
        assert name == "p1"
        assert mean == s.mean[1] and r == s.psrf[1]
