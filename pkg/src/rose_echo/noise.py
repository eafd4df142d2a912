"""Spontaneous-emission background, coherent artifact and the detection chain."""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np
from scipy.special import ndtr

from .model import BIN_WIDTH, DetectionChain, Medium, ParameterError, Timeline
from .dynamics import InversionProfile

# Observed SE maximum after one CHS pulse, photons per 256-ns bin in the crystal.
OBSERVED_SE_PER_BIN = 0.2


class OpticalDepthWarning(UserWarning):
    """The SE rate formula is used beyond its αL ≤ 1 validity range."""


@dataclass(frozen=True)
class NoiseModel:
    """Upper-level populations left by the rephasing pulses, plus coherent noise.

    ``se_calibration`` scales the SE rate formula (1 = bare prediction);
    ``artifact_delay`` places the coherent blip after the second pulse,
    ``None`` meaning one pulse width 1/β.  ``stray_light_profile`` is an
    optional ``(t, photons_per_bin)`` pair added as is.
    """

    n_e_after_one_chs: float = 1.0
    n_e_after_two_chs: float = 1.0 / 3.0
    coherent_artifact_photons: float = 0.5
    se_calibration: float = 1.0
    artifact_delay: Optional[float] = None
    stray_light_profile: Optional[tuple] = None

    def violations(self) -> list[str]:
        out = []
        for name in ("n_e_after_one_chs", "n_e_after_two_chs"):
            if not 0 <= getattr(self, name) <= 1:
                out.append(f"noise: 0 <= {name} <= 1 required")
        if not self.coherent_artifact_photons >= 0:
            out.append("noise: coherent_artifact_photons >= 0 required")
        if not self.se_calibration >= 0:
            out.append("noise: se_calibration >= 0 required")
        return out


def se_rate(alpha_L: float, n_e: float, delta: float) -> float:
    """Spontaneous-emission photon rate into the echo mode, αL·n_e·Δ/π (photons/s).

    ``delta`` is the angular width of the inverted band.  Warns with
    ``OpticalDepthWarning`` when αL > 1, where the formula is only indicative.
    """
    if not 0 <= n_e <= 1:
        raise ParameterError("noise", "n_e", f"must lie in [0, 1] (got {n_e})")
    if not delta > 0:
        raise ParameterError("noise", "delta", "must be > 0")
    if alpha_L > 1:
        warnings.warn(
            f"SE rate formula applied at alpha_L = {alpha_L} > 1", OpticalDepthWarning, stacklevel=2
        )
    return alpha_L * n_e * delta / math.pi


def predicted_se_per_bin(alpha_L: float, delta: float, bin_width: float = BIN_WIDTH) -> float:
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", OpticalDepthWarning)
        return se_rate(alpha_L, 1.0, delta) * bin_width


def observed_se_calibration(alpha_L: float, delta: float, bin_width: float = BIN_WIDTH) -> float:
    """Observed/predicted ratio of the single-pulse SE maximum (about 0.58 for the default medium and CHS pair)."""
    return OBSERVED_SE_PER_BIN / predicted_se_per_bin(alpha_L, delta, bin_width)


def upper_population(t, pulse_times: Sequence[float], noise: NoiseModel, T1: float) -> np.ndarray:
    """n_e(t): zero before the first pulse, decaying with T1 after each."""
    t = np.asarray(t, dtype=float)
    n_e = np.zeros_like(t)
    levels = [noise.n_e_after_one_chs, noise.n_e_after_two_chs]
    times = sorted(pulse_times)
    if len(times) > 2:
        raise ParameterError("noise", "pulse_times", "at most two rephasing pulses")
    for k, tp in enumerate(times):
        t_next = times[k + 1] if k + 1 < len(times) else math.inf
        m = (t >= tp) & (t < t_next)
        n_e[m] = levels[k] * np.exp(-(t[m] - tp) / T1)
    return n_e


def se_trace(
    t_grid,
    pulse_times: Sequence[float],
    noise_model: NoiseModel,
    medium: Medium,
    delta: float,
    bin_width: Optional[float] = None,
) -> np.ndarray:
    """Expected in-crystal SE photons per bin, evaluated at the ``t_grid`` times."""
    t = np.asarray(t_grid, dtype=float)
    if bin_width is None:
        bin_width = float(t[1] - t[0])
    n_e = upper_population(t, pulse_times, noise_model, medium.T1)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", OpticalDepthWarning)
        unit = se_rate(medium.alpha_L, 1.0, delta)
    return noise_model.se_calibration * unit * n_e * bin_width


def residual_inversion(profile: InversionProfile, band_halfwidth: Optional[float] = None) -> float:
    """Band-averaged upper-level population (w + 1)/2 over |Δ| ≤ µβ."""
    band = profile.band_halfwidth if band_halfwidth is None else band_halfwidth
    m = np.abs(profile.detuning) <= band
    if not (profile.detuning.min() <= -band and profile.detuning.max() >= band):
        raise ParameterError("noise", "profile", "profile does not cover the rephasing band")
    return float(np.mean((profile.w[m] + 1) / 2))


def coherent_artifact(
    noise_model: NoiseModel, timeline: Timeline, bin_edges, beta: float
) -> np.ndarray:
    """Gaussian blip of ``coherent_artifact_photons`` photons in the trailing wing of pulse 3.

    Width 1/β (rms), centred ``artifact_delay`` (default 1/β) after t3; the
    per-bin values are exact integrals of the blip over each bin.
    """
    edges = np.asarray(bin_edges, dtype=float)
    n = noise_model.coherent_artifact_photons
    if timeline.t3 is None or n == 0:
        return np.zeros(edges.size - 1)
    width = 1 / beta
    delay = width if noise_model.artifact_delay is None else noise_model.artifact_delay
    cdf = ndtr((edges - (timeline.t3 + delay)) / width)
    return n * np.diff(cdf)


def stray_light(noise_model: NoiseModel, t) -> np.ndarray:
    t = np.asarray(t, dtype=float)
    if noise_model.stray_light_profile is None:
        return np.zeros_like(t)
    ts, ys = noise_model.stray_light_profile
    return np.interp(t, ts, ys, left=0.0, right=0.0)


def apply_detection_chain(
    in_crystal_flux,
    chain: DetectionChain,
    is_fluorescence_broadband: bool = False,
    filter_in: bool = True,
) -> np.ndarray:
    """Expected detected counts per bin per sequence.

    Multiplies by photodetector and collection efficiency.  Broadband
    fluorescence (decay to all ground Stark sublevels) is further divided by
    ``spectral_filter_factor`` when the bandpass filter is in; SE computed from
    the ground-state absorption already sits inside the passband.
    """
    flux = np.asarray(in_crystal_flux, dtype=float)
    if np.any(flux < 0):
        raise ParameterError("noise", "in_crystal_flux", "must be >= 0")
    out = flux * chain.eta_photodetector * chain.eta_collection
    if is_fluorescence_broadband and filter_in:
        out = out / chain.spectral_filter_factor
    return out
