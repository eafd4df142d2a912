"""Photon counting over repeated sequences and gaussian-mode signal extraction."""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Optional

import numpy as np
from scipy.optimize import curve_fit

from .model import DetectionChain, ParameterError

RAW = "raw_detected"
IN_CRYSTAL = "photons_per_sequence_in_crystal"
RNG_ALGORITHM = "numpy.random.PCG64(SeedSequence([seed, stream]))"


@dataclass(frozen=True)
class CountHistogram:
    """Time-binned counts, either raw detector events or photons per sequence in the crystal."""

    bin_edges: np.ndarray
    counts: np.ndarray
    n_sequences: int
    normalization: str = RAW
    overall_efficiency: float = math.nan
    seed: Optional[int] = None

    @property
    def bin_width(self) -> float:
        return float(self.bin_edges[1] - self.bin_edges[0])

    @property
    def bin_starts(self) -> np.ndarray:
        return self.bin_edges[:-1]

    @property
    def bin_centers(self) -> np.ndarray:
        return 0.5 * (self.bin_edges[:-1] + self.bin_edges[1:])


def rng_for(seed: int, stream: int = 0) -> np.random.Generator:
    """Independent, reproducible generator per (seed, stream) pair."""
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence([int(seed), int(stream)])))


def simulate_counts(
    expected_per_bin_per_sequence,
    n_sequences: int,
    seed: int,
    bin_edges=None,
    stream: int = 0,
) -> CountHistogram:
    """Sum of ``n_sequences`` independent sequences, drawn as one Poisson per bin.

    A sum of independent Poisson variables is Poisson with the summed mean,
    so the result does not depend on how sequences would be scheduled.
    """
    lam = np.asarray(expected_per_bin_per_sequence, dtype=float)
    if np.any(lam < 0) or not np.isfinite(lam).all():
        raise ParameterError("counting", "expected", "must be finite and >= 0")
    if bin_edges is None:
        bin_edges = np.arange(lam.size + 1, dtype=float)
    edges = np.asarray(bin_edges, dtype=float)
    counts = rng_for(seed, stream).poisson(lam * n_sequences)
    return CountHistogram(edges, counts.astype(np.int64), int(n_sequences), RAW, seed=seed)


def normalize_to_crystal(hist: CountHistogram, chain: DetectionChain) -> CountHistogram:
    """Raw events → photons per sequence in the crystal: counts/(n_sequences × η_overall)."""
    if hist.normalization != RAW:
        raise ParameterError("counting", "normalization", "histogram is already normalized")
    eff = chain.overall_efficiency
    return replace(
        hist,
        counts=hist.counts / (hist.n_sequences * eff),
        normalization=IN_CRYSTAL,
        overall_efficiency=eff,
    )


def denormalize(hist: CountHistogram) -> CountHistogram:
    if hist.normalization != IN_CRYSTAL:
        raise ParameterError("counting", "normalization", "histogram is not normalized")
    raw = np.rint(hist.counts * hist.n_sequences * hist.overall_efficiency).astype(np.int64)
    return replace(hist, counts=raw, normalization=RAW)


def mode_weights(t, t_center: float, tau: float) -> np.ndarray:
    """Unit-sum gaussian mode exp(−(t − t_c)²/τ²) sampled at ``t``."""
    g = np.exp(-((np.asarray(t) - t_center) ** 2) / tau**2)
    return g / g.sum()


def gaussian_mode_extract(
    hist: CountHistogram, t_center: float, tau: float, method: str = "matched"
) -> float:
    """Photons carried by the gaussian temporal mode centred at ``t_center``.

    ``matched`` is the least-squares amplitude Σc·ĝ/Σĝ² with ĝ the unit-sum
    mode, so a histogram that is exactly N·ĝ returns N.  ``window`` is the
    plain sum of counts within ±2τ.
    """
    if hist.normalization != IN_CRYSTAL:
        raise ParameterError("counting", "normalization", "normalize_to_crystal first")
    if t_center - 3 * tau < hist.bin_edges[0] or t_center + 3 * tau > hist.bin_edges[-1]:
        raise ParameterError("counting", "t_center", "mode support extends beyond the histogram")
    t = hist.bin_centers
    c = np.asarray(hist.counts, dtype=float)
    if method == "matched":
        g = mode_weights(t, t_center, tau)
        return float(np.dot(c, g) / np.dot(g, g))
    if method == "window":
        return float(c[np.abs(t - t_center) <= 2 * tau].sum())
    raise ParameterError("counting", "method", f"unknown method {method!r}")


def snr(signal_photons: float, background_photons: float) -> float:
    if not background_photons > 0:
        raise ParameterError("counting", "background_photons", "must be > 0")
    return signal_photons / background_photons


def fit_exponential_decay(t, y, sigma=None) -> tuple[float, float, float]:
    """Fit y = A·exp(−(t − t[0])/T); returns (A, T, standard error of T)."""
    t = np.asarray(t, dtype=float)
    y = np.asarray(y, dtype=float)
    x = t - t[0]
    pos = y > 0
    slope, intercept = np.polyfit(x[pos], np.log(y[pos]), 1)
    p0 = (math.exp(intercept), -1 / slope if slope < 0 else x[-1])
    popt, pcov = curve_fit(
        lambda x, a, T: a * np.exp(-x / T), x, y, p0=p0, sigma=sigma, absolute_sigma=sigma is not None
    )
    return float(popt[0]), float(popt[1]), float(math.sqrt(pcov[1, 1]))
