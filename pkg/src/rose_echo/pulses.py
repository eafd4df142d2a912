"""Complex Rabi drives: CHS rephasing pulses and the weak gaussian signal."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from types import MappingProxyType
from typing import Mapping, NamedTuple

import numpy as np
from scipy.integrate import trapezoid

from .model import MAX_LINEAR_AREA, ParameterError, PulseEnvelope

# sech(x) falls below this fraction of the peak at the grid ends, else the
# pulse counts as truncated.
CHS_TRUNCATION = 1e-4
R_ADIAB = 10.0
R_SLOW = 10.0


@dataclass(frozen=True)
class SampledDrive:
    """Rabi drive Ω(t) in rad/s sampled on a uniform time grid."""

    t_grid: np.ndarray
    omega: np.ndarray
    kind: str = "custom_sampled"
    metadata: Mapping[str, float] = field(default_factory=dict)

    def __post_init__(self):
        t = np.array(self.t_grid, dtype=float)
        om = np.array(self.omega, dtype=complex)
        if t.ndim != 1 or om.shape != t.shape:
            raise ParameterError("pulses", "omega", "must be 1-D and match t_grid")
        if t.size >= 2:
            steps = np.diff(t)
            if np.any(steps <= 0):
                raise ParameterError("pulses", "t_grid", "must be strictly increasing")
            if np.max(np.abs(steps - steps.mean())) > 1e-9 * steps.mean():
                raise ParameterError("pulses", "t_grid", "must be uniform")
        t.flags.writeable = False
        om.flags.writeable = False
        object.__setattr__(self, "t_grid", t)
        object.__setattr__(self, "omega", om)
        object.__setattr__(self, "metadata", MappingProxyType(dict(self.metadata)))

    @property
    def step(self) -> float:
        return float(self.t_grid[1] - self.t_grid[0])

    @property
    def area(self) -> float:
        """Pulse area ∫|Ω| dt by the trapezoid rule."""
        return float(trapezoid(np.abs(self.omega), self.t_grid))

    @property
    def energy(self) -> float:
        """∫|Ω|² dt, the quantity photon flux is proportional to."""
        return float(trapezoid(np.abs(self.omega) ** 2, self.t_grid))

    @property
    def rate(self) -> float:
        """Fastest envelope rate (β or 1/τ) recorded by the generator, 0 if unknown."""
        return float(self.metadata.get("rate", 0.0))

    def instantaneous_frequency(self) -> np.ndarray:
        """d(arg Ω)/dt in rad/s (central differences on the unwrapped phase)."""
        phase = np.unwrap(np.angle(self.omega))
        return np.gradient(phase, self.t_grid)

    def __add__(self, other: "SampledDrive") -> "SampledDrive":
        if not np.array_equal(self.t_grid, other.t_grid):
            raise ParameterError("pulses", "t_grid", "drives must share a grid to be superposed")
        rate = max(self.rate, other.rate)
        return SampledDrive(self.t_grid, self.omega + other.omega, "custom_sampled", {"rate": rate})


def time_grid(t_start: float, t_end: float, step: float) -> np.ndarray:
    """Uniform grid ``t_start + k*step`` covering ``[t_start, t_end]``."""
    n = int(math.ceil((t_end - t_start) / step - 1e-9))
    return t_start + step * np.arange(n + 1)


def log_sech(x):
    """ln sech(x) without overflow for large |x|."""
    ax = np.abs(x)
    return math.log(2.0) - ax - np.log1p(np.exp(-2 * ax))


def chs_halfwidth(beta: float, truncation: float = CHS_TRUNCATION) -> float:
    """Half-span |t - t0| beyond which sech(β(t - t0)) < ``truncation``."""
    return math.acosh(1 / truncation) / beta


def make_chs(omega0: float, beta: float, mu: float, t0: float, grid) -> SampledDrive:
    """Complex hyperbolic secant pulse Ω₀·sech(β(t−t₀))^(1−iµ).

    The amplitude is Ω₀ sech(β(t−t₀)) and the phase −µ ln sech(β(t−t₀)), so the
    instantaneous frequency sweeps µβ·tanh(β(t−t₀)) from −µβ to +µβ.

    Raises
    ------
    ParameterError
        If a parameter is not positive, or the grid truncates the envelope
        above 1e-4 of its peak.
    """
    for name, value in (("omega0", omega0), ("beta", beta), ("mu", mu)):
        if not value > 0:
            raise ParameterError("pulses", name, f"must be > 0 (got {value})")
    t = np.asarray(grid, dtype=float)
    x = beta * (t - t0)
    ls = log_sech(x)
    edge = math.exp(max(ls[0], ls[-1]))
    if edge > CHS_TRUNCATION:
        raise ParameterError(
            "pulses",
            "grid",
            f"too short: CHS envelope truncated at {edge:.2e} of peak "
            f"(grid must span t0 ± {chs_halfwidth(beta) * beta:.1f}/β)",
        )
    omega = omega0 * np.exp(ls * (1 - 1j * mu))
    meta = {"omega0": omega0, "beta": beta, "mu": mu, "t0": t0, "rate": beta}
    return SampledDrive(t, omega, "chs", meta)


def make_gaussian_signal(
    tau: float, photon_number: float, t_center: float, reference_area: float, grid
) -> SampledDrive:
    """Weak signal with intensity ∝ exp(−(t−t_c)²/τ²) and area ``reference_area``.

    The field amplitude is exp(−(t−t_c)²/(2τ²)), normalised on the grid so the
    trapezoid area equals ``reference_area`` exactly.  ``photon_number`` is
    only carried as metadata: the Bloch simulation runs in the linear regime at
    the reference area and photon numbers are scaled afterwards.
    """
    if not tau > 0:
        raise ParameterError("pulses", "tau", f"must be > 0 (got {tau})")
    if not photon_number >= 0:
        raise ParameterError("pulses", "photon_number", "must be >= 0")
    if not 0 <= reference_area <= MAX_LINEAR_AREA:
        raise ParameterError(
            "pulses",
            "reference_area",
            f"{reference_area} rad leaves the linear regime (max {MAX_LINEAR_AREA} rad)",
        )
    t = np.asarray(grid, dtype=float)
    shape = np.exp(-((t - t_center) ** 2) / (2 * tau**2))
    norm = trapezoid(shape, t)
    omega = shape * (reference_area / norm) if reference_area > 0 else np.zeros_like(shape)
    meta = {
        "tau": tau,
        "photon_number": photon_number,
        "reference_area": reference_area,
        "t_center": t_center,
        "rate": 1 / tau,
    }
    return SampledDrive(t, omega.astype(complex), "gaussian_signal", meta)


def sample_envelope(pulse: PulseEnvelope, grid) -> SampledDrive:
    p = pulse.params
    if pulse.kind == "chs":
        return make_chs(p["omega0"], p["beta"], p["mu"], pulse.t_center, grid)
    if pulse.kind == "gaussian_signal":
        return make_gaussian_signal(
            p["tau"], p["photon_number"], pulse.t_center, p["reference_area"], grid
        )
    raise ParameterError("pulses", "kind", f"cannot sample pulse kind {pulse.kind!r}")


@dataclass(frozen=True)
class AdiabaticReport:
    mu_ratio: float
    adiabatic_ratio: float
    slow_ratio: float
    r_adiab: float = R_ADIAB
    r_slow: float = R_SLOW

    @property
    def checks(self) -> dict[str, bool]:
        return {
            "mu>2": self.mu_ratio > 1,
            "mu*beta^2<<omega0^2": self.adiabatic_ratio >= self.r_adiab,
            "T2*beta>>1": self.slow_ratio >= self.r_slow,
        }

    @property
    def failures(self) -> list[str]:
        messages = {
            "mu>2": f"µ>2 violated (µ/2 = {self.mu_ratio:.3g})",
            "mu*beta^2<<omega0^2": (
                f"adiabaticity violated (Ω₀²/µβ² = {self.adiabatic_ratio:.3g} < {self.r_adiab:g})"
            ),
            "T2*beta>>1": f"slow-decay condition violated (T₂β = {self.slow_ratio:.3g} < {self.r_slow:g})",
        }
        return [messages[k] for k, ok in self.checks.items() if not ok]

    @property
    def passed(self) -> bool:
        return all(self.checks.values())


def validate_adiabatic(
    omega0: float,
    beta: float,
    mu: float,
    T2: float,
    r_adiab: float = R_ADIAB,
    r_slow: float = R_SLOW,
) -> AdiabaticReport:
    """Margins of the CHS design against µ>2, µβ²≪Ω₀² and T₂β≫1.

    "≪" and "≫" are taken as a ratio of at least ``r_adiab`` / ``r_slow``.
    """
    for name, value in (("omega0", omega0), ("beta", beta), ("mu", mu), ("T2", T2)):
        if not value > 0:
            raise ParameterError("pulses", name, f"must be > 0 (got {value})")
    return AdiabaticReport(
        mu_ratio=mu / 2,
        adiabatic_ratio=omega0**2 / (mu * beta**2),
        slow_ratio=T2 * beta,
        r_adiab=r_adiab,
        r_slow=r_slow,
    )


class FilterAnalysis(NamedTuple):
    stretch_factor: float
    energy_fraction: float
    output_fwhm: float


def intensity_fwhm(t: np.ndarray, intensity: np.ndarray) -> float:
    """FWHM of the main lobe, with linear interpolation of the half-maximum crossings."""
    i_peak = int(np.argmax(intensity))
    half = intensity[i_peak] / 2

    def crossing(indices):
        prev = i_peak
        for i in indices:
            if intensity[i] < half:
                # interpolate between prev (above) and i (below)
                frac = (intensity[prev] - half) / (intensity[prev] - intensity[i])
                return t[prev] + frac * (t[i] - t[prev])
            prev = i
        raise ParameterError("pulses", "grid", "intensity never falls to half maximum")

    right = crossing(range(i_peak + 1, len(t)))
    left = crossing(range(i_peak - 1, -1, -1))
    return float(right - left)


def filtered_pulse_analysis(
    tau: float, band_halfwidth: float, n_samples: int = 2**18, span: float = 256.0
) -> FilterAnalysis:
    """Stretching and energy loss of a gaussian signal through an ideal spectral gate.

    The field exp(−t²/(2τ²)) is Fourier transformed, every component with
    |ω| > ``band_halfwidth`` is removed and the result transformed back.
    Durations are intensity FWHMs: the rms width of a hard-gated pulse grows
    without bound with the analysis window, so it is not a usable measure.

    Parameters
    ----------
    tau : float
        Intensity 1/e half-width of the input, seconds.
    band_halfwidth : float
        Gate half-width in rad/s; ``inf`` disables the gate.
    n_samples, span : int, float
        FFT size and the time window ``±span*tau``.
    """
    if not tau > 0:
        raise ParameterError("pulses", "tau", "must be > 0")
    if not band_halfwidth > 0:
        raise ParameterError("pulses", "band_halfwidth", "must be > 0")
    # Window length chosen so the gate edge falls midway between FFT bins.
    window = 2 * span * tau
    if math.isfinite(band_halfwidth):
        window = (math.floor(band_halfwidth * window / (2 * np.pi)) + 0.5) * 2 * np.pi / band_halfwidth
    t = (np.arange(n_samples) - n_samples // 2) * (window / n_samples)
    field_in = np.exp(-(t**2) / (2 * tau**2))
    spectrum = np.fft.fft(field_in)
    omega = 2 * np.pi * np.fft.fftfreq(n_samples, t[1] - t[0])
    spectrum[np.abs(omega) > band_halfwidth] = 0
    field_out = np.fft.ifft(spectrum)

    i_in = field_in**2
    i_out = np.abs(field_out) ** 2
    fwhm_in = intensity_fwhm(t, i_in)
    fwhm_out = intensity_fwhm(t, i_out)
    return FilterAnalysis(
        stretch_factor=fwhm_out / fwhm_in,
        energy_fraction=float(i_out.sum() / i_in.sum()),
        output_fwhm=fwhm_out,
    )
