"""Shared domain types, experiment constants and scenario validation.

All quantities are SI internally: seconds, metres, rad/s.  The value objects
are frozen dataclasses; construction is lenient so that ``validate_scenario``
can report every broken invariant at once instead of failing on the first.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from types import MappingProxyType
from typing import Mapping, Optional, Sequence

import numpy as np

TWO_PI = 2 * math.pi

# Experiment constants (Tm:YAG crystal, 793 nm line).
ALPHA_L = 1.4
CRYSTAL_LENGTH = 8e-3
WAVELENGTH = 793e-9
T1 = 460e-6
T2 = 55e-6

CHS_MU = 3.0
CHS_BETA = TWO_PI * 80e3
CHS_OMEGA0 = TWO_PI * 800e3

SIGNAL_TAU = 2e-6
SIGNAL_PHOTONS = 14.0
SIGNAL_REFERENCE_AREA = 0.01
MAX_LINEAR_AREA = 0.05

T1_PULSE = 0.0
T2_PULSE = 10e-6
T3_PULSE = 30e-6
T12 = 10e-6
T23 = 20e-6

ETA_PHOTODETECTOR = 0.55
ETA_COLLECTION = 0.40
SPECTRAL_FILTER_FACTOR = 7.5
BIN_WIDTH = 256e-9
N_SEQUENCES = 15000
REP_RATE = 50.0

EXTRACTION_ANGLE = 10e-3


class ParameterError(ValueError):
    """Invalid input, tagged with the module and the offending parameter."""

    def __init__(self, module: str, parameter: str, message: str):
        self.module = module
        self.parameter = parameter
        super().__init__(f"{module}: {parameter}: {message}")


@dataclass(frozen=True)
class Medium:
    """Inhomogeneously broadened two-level absorber.

    ``inhomogeneous_model`` is ``"flat"`` (uniform detuning weights over the
    simulated band) or ``"gaussian"`` with ``inhomogeneous_width`` the rms
    width in rad/s.
    """

    alpha_L: float = ALPHA_L
    length_L: float = CRYSTAL_LENGTH
    T1: float = T1
    T2: float = T2
    n_slices: int = 64
    inhomogeneous_model: str = "flat"
    inhomogeneous_width: Optional[float] = None

    def violations(self) -> list[str]:
        out = []
        if not self.alpha_L > 0:
            out.append(f"medium: alpha_L > 0 required (alpha_L = {self.alpha_L})")
        if not self.length_L > 0:
            out.append(f"medium: length_L > 0 required (length_L = {self.length_L})")
        if not self.T1 > 0:
            out.append(f"medium: T1 > 0 required (T1 = {self.T1})")
        if not self.T2 > 0:
            out.append(f"medium: T2 > 0 required (T2 = {self.T2})")
        elif self.T1 > 0 and self.T2 > 2 * self.T1:
            out.append("medium: T2 <= 2*T1 required")
        if int(self.n_slices) != self.n_slices or self.n_slices < 1:
            out.append(f"medium: n_slices >= 1 required (n_slices = {self.n_slices})")
        if self.inhomogeneous_model not in ("flat", "gaussian"):
            out.append(
                f"medium: inhomogeneous_model must be flat or gaussian "
                f"(got {self.inhomogeneous_model!r})"
            )
        elif self.inhomogeneous_model == "gaussian" and not (
            self.inhomogeneous_width and self.inhomogeneous_width > 0
        ):
            out.append("medium: gaussian inhomogeneous_width > 0 required")
        return out


@dataclass(frozen=True)
class WaveVector:
    """Unit propagation direction times magnitude ``magnitude_k`` (rad/m)."""

    direction: tuple
    magnitude_k: float

    def __post_init__(self):
        d = np.asarray(self.direction, dtype=float)
        if d.shape != (3,):
            raise ParameterError("model", "direction", "must be a 3-vector")
        norm = float(np.linalg.norm(d))
        if norm == 0 or not math.isfinite(norm):
            raise ParameterError("model", "direction", "must be a finite non-zero vector")
        if abs(norm - 1.0) > 1e-12:
            d = d / norm
        object.__setattr__(self, "direction", tuple(float(x) for x in d))
        if not self.magnitude_k > 0:
            raise ParameterError("model", "magnitude_k", "must be > 0")

    @classmethod
    def from_wavelength(cls, direction, wavelength: float = WAVELENGTH) -> "WaveVector":
        return cls(tuple(direction), TWO_PI / wavelength)

    @property
    def vector(self) -> np.ndarray:
        return np.asarray(self.direction) * self.magnitude_k


@dataclass(frozen=True)
class PulseEnvelope:
    """One input pulse: a weak gaussian signal or a strong CHS rephasing pulse.

    ``params`` keys: gaussian_signal -> ``tau``, ``photon_number``,
    ``reference_area``; chs -> ``omega0``, ``beta``, ``mu``.
    """

    kind: str
    t_center: float
    params: Mapping[str, float]
    wavevector: Optional[WaveVector] = None
    polarization_tag: str = "signal"

    def __post_init__(self):
        object.__setattr__(self, "params", MappingProxyType(dict(self.params)))

    @classmethod
    def gaussian(
        cls,
        t_center: float = T1_PULSE,
        tau: float = SIGNAL_TAU,
        photon_number: float = SIGNAL_PHOTONS,
        reference_area: float = SIGNAL_REFERENCE_AREA,
        wavevector: Optional[WaveVector] = None,
    ) -> "PulseEnvelope":
        return cls(
            "gaussian_signal",
            t_center,
            {"tau": tau, "photon_number": photon_number, "reference_area": reference_area},
            wavevector,
            "signal",
        )

    @classmethod
    def chs(
        cls,
        t_center: float,
        omega0: float = CHS_OMEGA0,
        beta: float = CHS_BETA,
        mu: float = CHS_MU,
        wavevector: Optional[WaveVector] = None,
    ) -> "PulseEnvelope":
        return cls("chs", t_center, {"omega0": omega0, "beta": beta, "mu": mu}, wavevector, "rephasing")

    def violations(self, label: str = "pulse") -> list[str]:
        p = self.params
        out = []
        if self.kind == "gaussian_signal":
            if not p.get("tau", 0) > 0:
                out.append(f"{label}: τ > 0 required (tau = {p.get('tau')})")
            if not p.get("photon_number", 0) >= 0:
                out.append(f"{label}: photon_number >= 0 required")
            area = p.get("reference_area", 0)
            if not 0 <= area <= MAX_LINEAR_AREA:
                out.append(
                    f"{label}: 0 <= reference_area <= {MAX_LINEAR_AREA} rad required "
                    f"(reference_area = {area})"
                )
        elif self.kind == "chs":
            for name in ("omega0", "beta", "mu"):
                if not p.get(name, 0) > 0:
                    out.append(f"{label}: {name} > 0 required ({name} = {p.get(name)})")
        elif self.kind != "custom_sampled":
            out.append(f"{label}: unknown pulse kind {self.kind!r}")
        return out


@dataclass(frozen=True)
class Timeline:
    """Arrival times of the signal (t1) and the rephasing pulses (t2, t3).

    ``t3`` is ``None`` for a plain two-pulse echo run.
    """

    t1: float = T1_PULSE
    t2: float = T2_PULSE
    t3: Optional[float] = T3_PULSE

    @property
    def t12(self) -> float:
        return self.t2 - self.t1

    @property
    def t23(self) -> Optional[float]:
        return None if self.t3 is None else self.t3 - self.t2

    @property
    def t_e(self) -> float:
        return self.t1 + 2 * self.t12

    @property
    def t_e_prime(self) -> Optional[float]:
        return None if self.t3 is None else self.t1 + 2 * self.t23

    @property
    def n_rephasing(self) -> int:
        return 1 if self.t3 is None else 2

    def violations(self) -> list[str]:
        out = []
        if not self.t1 < self.t2:
            out.append("timeline: t1 < t2 required")
        if self.t3 is not None:
            if not self.t2 < self.t3:
                out.append("timeline: t2 < t3 required")
            if not self.t12 < self.t23:
                out.append(
                    f"timeline: t12 < t23 required (t12 = {self.t12:g} s, t23 = {self.t23:g} s)"
                )
            elif not self.t_e_prime > self.t3:
                out.append("timeline: t_e_prime > t3 required")
        return out


@dataclass(frozen=True)
class DetectionChain:
    eta_photodetector: float = ETA_PHOTODETECTOR
    eta_collection: float = ETA_COLLECTION
    spectral_filter_factor: float = SPECTRAL_FILTER_FACTOR
    bin_width: float = BIN_WIDTH
    n_sequences: int = N_SEQUENCES
    rep_rate: float = REP_RATE

    @property
    def overall_efficiency(self) -> float:
        return self.eta_photodetector * self.eta_collection

    def violations(self) -> list[str]:
        out = []
        if not 0 < self.eta_photodetector <= 1:
            out.append("detection: 0 < eta_photodetector <= 1 required")
        if not 0 < self.eta_collection <= 1:
            out.append("detection: 0 < eta_collection <= 1 required")
        if not self.spectral_filter_factor >= 1:
            out.append("detection: spectral_filter_factor >= 1 required")
        if not self.bin_width > 0:
            out.append("detection: bin_width > 0 required")
        if int(self.n_sequences) != self.n_sequences or self.n_sequences < 1:
            out.append("detection: n_sequences >= 1 required")
        return out


def validate_scenario(
    medium: Medium, pulses: Sequence[PulseEnvelope], timeline: Timeline
) -> list[str]:
    """Return the violated invariants in a fixed order; an empty list means valid."""
    report = list(medium.violations())
    report += timeline.violations()

    for i, pulse in enumerate(pulses):
        report += pulse.violations(f"pulses[{i}]")

    signals = [p for p in pulses if p.kind == "gaussian_signal"]
    rephasing = [p for p in pulses if p.kind == "chs"]
    if len(signals) != 1:
        report.append(f"pulses: exactly one gaussian_signal pulse required (got {len(signals)})")
    if len(rephasing) != timeline.n_rephasing:
        report.append(
            f"pulses: {timeline.n_rephasing} chs pulse(s) required by the timeline "
            f"(got {len(rephasing)})"
        )
    if signals and rephasing:
        if not all(signals[0].t_center < r.t_center for r in rephasing):
            report.append("pulses: signal pulse must precede the rephasing pulses")
    expected = [timeline.t1, timeline.t2] + ([] if timeline.t3 is None else [timeline.t3])
    actual = sorted(p.t_center for p in pulses)
    if len(actual) == len(expected) and not np.allclose(actual, expected, rtol=0, atol=1e-12):
        report.append("pulses: pulse centres must coincide with the timeline t1, t2, t3")
    return report


@dataclass(frozen=True)
class BeamGeometry:
    """Propagation directions of the signal (k1) and rephasing beams (k2, k3)."""

    k1: tuple = (0.0, 0.0, 1.0)
    k2: tuple = field(
        default=(math.sin(EXTRACTION_ANGLE), 0.0, -math.cos(EXTRACTION_ANGLE))
    )
    k3: tuple = field(
        default=(math.sin(EXTRACTION_ANGLE), 0.0, -math.cos(EXTRACTION_ANGLE))
    )
    wavelength: float = WAVELENGTH

    def wavevectors(self) -> tuple[WaveVector, WaveVector, WaveVector]:
        return tuple(WaveVector.from_wavelength(d, self.wavelength) for d in (self.k1, self.k2, self.k3))
