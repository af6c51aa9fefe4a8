"""Tests for pilot-based channel, power and SNR estimation."""

import numpy as np
import pytest

from relaybf.channel import complex_normal
from relaybf.estimation import (
    SNR_MAX,
    PilotBlock,
    estimate_compound_channel,
    estimate_power,
    estimate_snr,
)


def test_all_ones_pilots_recover_channel_exactly():
    h = 0.7 - 1.3j
    pilots = np.ones(10, dtype=complex)
    block = PilotBlock(pilots, h * pilots)
    assert estimate_compound_channel(block) == pytest.approx(h, abs=1e-15)


def test_estimate_is_linear_in_observations():
    rng = np.random.default_rng(3)
    pilots = complex_normal(rng, (8,))
    ya = complex_normal(rng, (8,))
    yb = complex_normal(rng, (8,))
    ha = estimate_compound_channel(PilotBlock(pilots, ya))
    hb = estimate_compound_channel(PilotBlock(pilots, yb))
    hab = estimate_compound_channel(PilotBlock(pilots, 2.0 * ya + 0.5j * yb))
    assert hab == pytest.approx(2.0 * ha + 0.5j * hb, rel=1e-12)


def test_estimator_variance_scales_as_noise_over_length():
    # var(h_hat) = sigma^2 / L for unit-modulus pilots.
    rng = np.random.default_rng(7)
    h = 1.0 + 0.5j
    sigma2 = 0.4
    length = 10
    trials = 200_000
    pilots = np.ones(length, dtype=complex)
    noise = complex_normal(rng, (trials, length), variance=sigma2)
    obs = h * pilots + noise
    est = np.sum(obs * np.conj(pilots), axis=-1) / length
    var = float(np.mean(np.abs(est - h) ** 2))
    assert var == pytest.approx(sigma2 / length, rel=0.03)


def test_power_estimate_is_squared_magnitude():
    assert estimate_power(3.0 - 4.0j) == pytest.approx(25.0, rel=1e-12)
    assert estimate_power(0.0) == 0.0


def test_snr_estimate_frozen_symmetric_residual():
    # pilots [1, 1], y = [1+eps, 1-eps]: h_hat = 1, residual mean = eps^2,
    # so the estimate is exactly 1/eps^2.
    eps = 0.05
    block = PilotBlock([1.0, 1.0], [1.0 + eps, 1.0 - eps])
    h_hat = estimate_compound_channel(block)
    assert h_hat == pytest.approx(1.0, abs=1e-15)
    assert estimate_snr(h_hat, block) == pytest.approx(1.0 / eps**2, rel=1e-12)


def test_noiseless_block_hits_snr_cap():
    pilots = np.ones(5, dtype=complex)
    block = PilotBlock(pilots, (2.0 + 1.0j) * pilots)
    h_hat = estimate_compound_channel(block)
    assert estimate_snr(h_hat, block) == SNR_MAX


def test_split_halves_average_to_whole_for_equal_halves():
    # When both halves see the same channel, the mean of the two half
    # estimates equals the whole-interval estimate (all-ones pilots).
    rng = np.random.default_rng(11)
    h = 0.9 - 0.2j
    pilots = np.ones(10, dtype=complex)
    obs = h * pilots + complex_normal(rng, (10,), variance=0.1)
    whole = estimate_compound_channel(PilotBlock(pilots, obs))
    first = estimate_compound_channel(PilotBlock(pilots[:5], obs[:5]))
    second = estimate_compound_channel(PilotBlock(pilots[5:], obs[5:]))
    assert 0.5 * (first + second) == pytest.approx(whole, rel=1e-12)


def test_snr_estimate_tracks_true_snr_on_average():
    rng = np.random.default_rng(13)
    h = 1.5 + 0.0j
    sigma2 = 0.25
    pilots = np.ones(10, dtype=complex)
    vals = []
    for _ in range(4000):
        obs = h * pilots + complex_normal(rng, (10,), variance=sigma2)
        block = PilotBlock(pilots, obs)
        vals.append(estimate_snr(estimate_compound_channel(block), block))
    # The residual-based denominator is biased low for short blocks, so the
    # mean estimate overshoots |h|^2/sigma^2 = 9; the median stays close.
    assert 7.0 < float(np.median(vals)) < 12.0


def test_rejects_zero_energy_and_mismatched_lengths():
    with pytest.raises(ValueError):
        PilotBlock([0.0, 0.0], [1.0, 1.0])
    with pytest.raises(ValueError):
        PilotBlock([1.0, 1.0], [1.0])
    with pytest.raises(ValueError):
        PilotBlock([], [])
