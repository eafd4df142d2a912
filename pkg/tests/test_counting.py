import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import stats

from rose_echo.counting import (
    IN_CRYSTAL,
    RAW,
    CountHistogram,
    denormalize,
    fit_exponential_decay,
    gaussian_mode_extract,
    mode_weights,
    normalize_to_crystal,
    simulate_counts,
    snr,
)
from rose_echo.model import DetectionChain, ParameterError

EDGES = 256e-9 * np.arange(-60, 61)
CENTERS = 0.5 * (EDGES[1:] + EDGES[:-1])


def norm_hist(values):
    return CountHistogram(EDGES, np.asarray(values, float), 15000, IN_CRYSTAL, 0.22)


def test_zero_expectation_gives_zeros():
    h = simulate_counts(np.zeros(10), 15000, seed=1)
    assert h.normalization == RAW
    assert not h.counts.any()
    assert h.counts.dtype.kind == "i"


def test_deterministic_and_seed_dependent():
    lam = np.full(200, 0.044)
    a = simulate_counts(lam, 15000, seed=5)
    b = simulate_counts(lam, 15000, seed=5)
    c = simulate_counts(lam, 15000, seed=6)
    assert np.array_equal(a.counts, b.counts)
    assert not np.array_equal(a.counts, c.counts)
    # Same distribution: two-sample KS test does not reject.
    assert stats.ks_2samp(a.counts, c.counts).pvalue > 1e-3


def test_poisson_moments_over_many_runs():
    counts = np.array([simulate_counts([0.044], 15000, seed=s).counts[0] for s in range(1000)])
    mean = 660.0
    assert abs(counts.mean() - mean) < 3 * math.sqrt(mean) / math.sqrt(1000)
    assert 0.9 <= counts.var(ddof=1) / counts.mean() <= 1.1


def test_streams_are_independent():
    a = simulate_counts(np.full(50, 1.0), 100, seed=1, stream=0)
    b = simulate_counts(np.full(50, 1.0), 100, seed=1, stream=1)
    assert not np.array_equal(a.counts, b.counts)


def test_negative_expectation_rejected():
    with pytest.raises(ParameterError):
        simulate_counts([-0.1], 10, seed=0)


def test_normalization_anchor_and_round_trip():
    raw = CountHistogram(np.array([0.0, 1.0, 2.0]), np.array([646, 0]), 15000)
    n = normalize_to_crystal(raw, DetectionChain())
    assert n.counts[0] == pytest.approx(646 / 3300, rel=1e-12)
    assert n.counts[0] == pytest.approx(0.196, abs=5e-4)
    assert n.counts[1] == 0
    back = denormalize(n)
    assert np.array_equal(back.counts, raw.counts)
    with pytest.raises(ParameterError, match="already"):
        normalize_to_crystal(n, DetectionChain())


def test_mode_extract_exact_on_noiseless_mode():
    g = mode_weights(CENTERS, 0.0, 2e-6)
    assert gaussian_mode_extract(norm_hist(3.5 * g), 0.0, 2e-6) == pytest.approx(3.5, rel=1e-12)


@given(st.floats(-5, 5), st.floats(-5, 5), st.integers(0, 1000))
def test_mode_extract_linear(a, b, seed):
    rng = np.random.default_rng(seed)
    x, y = rng.random(CENTERS.size), rng.random(CENTERS.size)
    lhs = gaussian_mode_extract(norm_hist(a * x + b * y), 0.0, 2e-6)
    rhs = a * gaussian_mode_extract(norm_hist(x), 0.0, 2e-6) + b * gaussian_mode_extract(norm_hist(y), 0.0, 2e-6)
    assert lhs == pytest.approx(rhs, rel=1e-9, abs=1e-9)


def test_flat_background_in_mode():
    # A flat level B per bin projects to B·√(2π)·τ/bin on the unit-sum mode.
    value = gaussian_mode_extract(norm_hist(np.full(CENTERS.size, 0.05)), 0.0, 2e-6)
    assert value == pytest.approx(0.05 * math.sqrt(2 * math.pi) * 2e-6 / 256e-9, rel=1e-3)


def test_window_method():
    h = norm_hist(np.ones(CENTERS.size))
    assert gaussian_mode_extract(h, 0.0, 2e-6, method="window") == np.sum(np.abs(CENTERS) <= 4e-6)
    with pytest.raises(ParameterError):
        gaussian_mode_extract(h, 0.0, 2e-6, method="other")


def test_mode_extract_preconditions():
    h = norm_hist(np.ones(CENTERS.size))
    with pytest.raises(ParameterError, match="beyond"):
        gaussian_mode_extract(h, 12e-6, 2e-6)
    raw = CountHistogram(EDGES, np.ones(CENTERS.size, int), 15000)
    with pytest.raises(ParameterError, match="normalize"):
        gaussian_mode_extract(raw, 0.0, 2e-6)


def test_snr():
    assert snr(1.4, 1.1) == pytest.approx(1.2727, abs=1e-4)
    assert snr(2.0, 2.0) == 1.0
    with pytest.raises(ParameterError):
        snr(1.0, 0.0)


@given(st.floats(0.01, 10), st.floats(0.01, 10), st.floats(0.01, 100))
def test_snr_scale_invariant(s, b, a):
    assert snr(a * s, a * b) == pytest.approx(snr(s, b), rel=1e-12)


def test_exponential_fit_recovers_noiseless_decay():
    t = np.linspace(0, 1e-3, 500)
    amp, T, err = fit_exponential_decay(t, 0.2 * np.exp(-t / 460e-6))
    assert amp == pytest.approx(0.2, rel=1e-9)
    assert T == pytest.approx(460e-6, rel=1e-9)
