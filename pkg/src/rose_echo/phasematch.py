"""Wavevector bookkeeping: which echoes are phase matched and which stay silent."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .model import ParameterError, WaveVector

MATCH_THRESHOLD = math.pi / 10
SILENCE_THRESHOLD = math.pi


@dataclass(frozen=True)
class MatchReport:
    k_echo: np.ndarray
    mismatch_phase: float
    classification: str  # "emitted" | "marginal" | "silenced"

    @property
    def emitted(self) -> bool:
        return self.classification == "emitted"

    @property
    def silenced(self) -> bool:
        return self.classification == "silenced"

    def as_dict(self) -> dict:
        return {
            "k_echo": [float(x) for x in self.k_echo],
            "mismatch_phase": float(self.mismatch_phase),
            "classification": self.classification,
        }


def _check_magnitudes(*ks: WaveVector) -> None:
    k0 = ks[0].magnitude_k
    for i, k in enumerate(ks[1:], start=2):
        if abs(k.magnitude_k - k0) > 1e-9 * k0:
            raise ParameterError(
                "phasematch", f"k{i}", f"|k{i}| = {k.magnitude_k} differs from |k1| = {k0}"
            )


def echo_wavevector_2pe(k1: WaveVector, k2: WaveVector) -> np.ndarray:
    """Spatial phase 2k₂ − k₁ imprinted by the signal and the first rephasing pulse."""
    _check_magnitudes(k1, k2)
    return 2 * k2.vector - k1.vector


def echo_wavevector_rose(k1: WaveVector, k2: WaveVector, k3: WaveVector) -> np.ndarray:
    """Spatial phase after the second rephasing pulse, k₁ + 2(k₃ − k₂)."""
    _check_magnitudes(k1, k2, k3)
    return k1.vector + 2 * (k3.vector - k2.vector)


def classify(
    k_echo,
    k: float,
    L: float,
    match_threshold: float = MATCH_THRESHOLD,
    silence_threshold: float = SILENCE_THRESHOLD,
) -> MatchReport:
    """Longitudinal phase-matching verdict for an echo with wavevector ``k_echo``.

    |(|k_echo| − k)L| < ``match_threshold`` is emitted, ≥ ``silence_threshold``
    (boundary included) is silenced, anything in between is marginal.
    """
    if not k > 0:
        raise ParameterError("phasematch", "k", "must be > 0")
    if not L > 0:
        raise ParameterError("phasematch", "L", "must be > 0")
    k_echo = np.asarray(k_echo, dtype=float)
    mismatch = (float(np.linalg.norm(k_echo)) - k) * L
    if abs(mismatch) >= silence_threshold:
        label = "silenced"
    elif abs(mismatch) < match_threshold:
        label = "emitted"
    else:
        label = "marginal"
    return MatchReport(k_echo, mismatch, label)


def protocol_match(k1: WaveVector, k2: WaveVector, k3: WaveVector | None, L: float) -> dict:
    """Match reports for the primary echo and, if a third pulse exists, the revived echo."""
    k = float(np.linalg.norm(k1.vector))
    reports = {"2pe": classify(echo_wavevector_2pe(k1, k2), k, L)}
    if k3 is not None:
        reports["rose"] = classify(echo_wavevector_rose(k1, k2, k3), k, L)
    return reports
