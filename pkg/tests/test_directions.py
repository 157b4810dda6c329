import math
from collections import Counter

import numpy as np
import pytest
from scipy import stats

from oracles import gaussian_tail
from sparsecut.directions import (SignMatrixSampler, default_coin_count, isoperimetry_exact_rate,
                                  isoperimetry_violation_rate, pm1_stretch_tail, sample_chain,
                                  sample_pm1_chain, sample_shuffled, standard_normal, trial_rng)


def test_trial_streams_are_reproducible_and_distinct():
    a = trial_rng(7, 1, 2).random(4)
    assert np.array_equal(a, trial_rng(7, 1, 2).random(4))
    assert not np.array_equal(a, trial_rng(7, 1, 3).random(4))
    assert not np.array_equal(a, trial_rng(8, 1, 2).random(4))


def test_standard_normal_distribution():
    z = standard_normal(trial_rng(1), (200_000,))
    assert abs(z.mean()) < 0.01
    assert abs(z.var() - 1) < 0.01
    assert stats.kstest(z, "norm").pvalue > 1e-3


def test_chain_correlation_matches_rho():
    rho = 0.8
    pairs = np.array([sample_chain(1, 2, rho, trial_rng(3, i)).vectors[:, 0] for i in range(20_000)])
    assert np.corrcoef(pairs.T)[0, 1] == pytest.approx(rho, abs=0.02)
    assert pairs[:, 1].var() == pytest.approx(1.0, abs=0.04)


def test_rho_extremes():
    chain = sample_chain(5, 4, 1.0, 0)
    assert np.allclose(chain.vectors, chain.vectors[0])
    with pytest.raises(ValueError):
        sample_chain(3, 2, 1.5, 0)
    with pytest.raises(ValueError):
        sample_chain(0, 2, 0.5, 0)


def test_shuffled_interleaving_is_uniform():
    R = 2
    counts = Counter()
    lengths = Counter()
    for i in range(12_000):
        ch = sample_shuffled(3, R, 0.5, trial_rng(4, i))
        counts[ch.interleaving] += 1
        lengths[len(ch)] += 1
        assert sum(ch.interleaving) == R and 1 <= len(ch) <= R
    # C(4, 2) = 6 merges, each with probability 1/6.
    assert len(counts) == 6
    assert stats.chisquare(list(counts.values())).pvalue > 1e-3
    assert stats.chisquare(list(lengths.values())).pvalue > 1e-3


def test_negate_flips_every_direction():
    ch = sample_shuffled(4, 3, 0.5, 1)
    assert np.array_equal(ch.negate().vectors, -ch.vectors)


def test_sign_sampler_directions_are_near_gaussian():
    k = default_coin_count(1024)
    assert k == 90
    sampler = SignMatrixSampler(50_000, k, 2)
    u = sampler.direction()
    assert u.var() == pytest.approx(1.0, abs=0.03)
    v = sampler.step(0.9)
    assert np.corrcoef(u, v)[0, 1] == pytest.approx(0.9, abs=0.01)


def test_pm1_chain_shape():
    ch = sample_pm1_chain(6, 4, 0.5, 30, 0)
    assert ch.vectors.shape == (4, 6)
    with pytest.raises(ValueError):
        sample_pm1_chain(6, 0, 0.5, 30, 0)


def test_pm1_tail_close_to_gaussian_tail():
    # The +-1 projection is close to Gaussian, so at t=1, rho=0 the tail is near Pr[N(0,1) > 1].
    rate = pm1_stretch_tail(90, 0.0, 1.0, 40_000, 5)
    assert rate == pytest.approx(gaussian_tail(1.0), abs=0.01)


def test_isoperimetry_rates_agree_with_closed_form():
    for delta, rho, eps in ((0.3, 0.5, 0.1), (0.1, 0.9, 0.05), (0.5, 0.7, 0.5)):
        exact = isoperimetry_exact_rate(delta, rho, eps)
        mc = isoperimetry_violation_rate(delta, rho, eps, 200_000, 9)
        sd = math.sqrt(max(exact * (1 - exact), 1e-12) / 200_000)
        assert abs(mc - exact) <= 5 * sd + 1e-5
        assert exact < eps
    with pytest.raises(ValueError):
        isoperimetry_violation_rate(0.3, 1.0, 0.1, 10, 0)
