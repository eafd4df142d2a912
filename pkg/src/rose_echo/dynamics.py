"""Optical Bloch dynamics of the inhomogeneous ensemble and echo emission.

Equations of motion, with s = u + iv the coherence and w the inversion
(−1 ground, +1 excited)::

    ds/dt = (−iΔ − 1/T2)·s + iΩ(t)·w
    dw/dt = −Im(Ω*(t)·s) − (w + 1)/T1

A resonant real Ω rotates the ground state to s = −i sinθ, w = −cosθ with
θ = ∫Ω dt, and |s|² + w² is conserved without relaxation.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np
from scipy.integrate import trapezoid

from .model import TWO_PI, Medium, ParameterError, PulseEnvelope, Timeline
from .phasematch import MatchReport
from .pulses import SampledDrive, chs_halfwidth, sample_envelope, time_grid

STEP_FRACTION = 0.02
BLOCK_SIZE = 512


@dataclass(frozen=True)
class BlochState:
    s: complex = 0j
    w: float = -1.0

    @property
    def norm2(self) -> float:
        return abs(self.s) ** 2 + self.w**2


@dataclass(frozen=True)
class BlochTrajectory:
    t: np.ndarray
    s: np.ndarray
    w: np.ndarray

    @property
    def final(self) -> BlochState:
        return BlochState(complex(self.s[-1]), float(self.w[-1]))


@dataclass(frozen=True)
class SimulationParams:
    """Integrator and detuning-grid settings (angular units)."""

    dt: float = 2e-9
    detuning_span: float = TWO_PI * 3e6
    n_detunings: int = 401
    record_every: int = 32
    threads: int = 1
    seed: int = 20131

    def detuning_grid(self) -> np.ndarray:
        g = np.linspace(-self.detuning_span / 2, self.detuning_span / 2, self.n_detunings)
        return 0.5 * (g - g[::-1])  # exactly antisymmetric


def max_step(max_rabi: float, max_detuning: float, rate: float = 0.0) -> float:
    """Largest RK4 step allowed: 2% of the fastest time scale."""
    fastest = max(max_rabi, max_detuning, rate)
    return math.inf if fastest == 0 else STEP_FRACTION / fastest


def _check_step(dt: float, limit: float) -> None:
    if not dt > 0:
        raise ParameterError("dynamics", "dt", "must be > 0")
    if dt > limit * (1 + 1e-9):
        raise ParameterError(
            "dynamics", "dt", f"{dt:.3e} s exceeds the resolution limit {limit:.3e} s"
        )


def _rk4(s, w, omega_half, detunings, g1, g2, dt, n_steps, record_every):
    """Fixed-step RK4 over arrays; omega_half[..., k] is Ω at t0 + k·dt/2.

    ``s``/``w`` have shape (n_runs, n_det); ``omega_half`` (n_runs, 2n+1).
    Returns recorded step indices and the (n_rec, n_runs, n_det) states.
    """
    a = -1j * detunings - g2
    half = 0.5 * dt
    sixth = dt / 6.0
    rec = list(range(0, n_steps, record_every)) + [n_steps]
    rec = sorted(set(rec))
    S = np.empty((len(rec),) + s.shape, complex)
    W = np.empty((len(rec),) + w.shape, float)
    om = omega_half[..., None]
    om_conj = np.conj(om)
    i_om = 1j * om
    r = 0
    for i in range(n_steps + 1):
        if i == rec[r]:
            S[r] = s
            W[r] = w
            r += 1
            if not (np.isfinite(s).all() and np.isfinite(w).all()):
                raise FloatingPointError(f"dynamics: non-finite Bloch state at step {i}")
        if i == n_steps:
            break
        ia, ib, ic = i_om[:, 2 * i], i_om[:, 2 * i + 1], i_om[:, 2 * i + 2]
        ca, cb, cc = om_conj[:, 2 * i], om_conj[:, 2 * i + 1], om_conj[:, 2 * i + 2]
        k1s = a * s + ia * w
        k1w = -(ca * s).imag - g1 * (w + 1)
        s2 = s + half * k1s
        w2 = w + half * k1w
        k2s = a * s2 + ib * w2
        k2w = -(cb * s2).imag - g1 * (w2 + 1)
        s3 = s + half * k2s
        w3 = w + half * k2w
        k3s = a * s3 + ib * w3
        k3w = -(cb * s3).imag - g1 * (w3 + 1)
        s4 = s + dt * k3s
        w4 = w + dt * k3w
        k4s = a * s4 + ic * w4
        k4w = -(cc * s4).imag - g1 * (w4 + 1)
        s = s + sixth * (k1s + 2 * k2s + 2 * k3s + k4s)
        w = w + sixth * (k1w + 2 * k2w + 2 * k3w + k4w)
    return np.asarray(rec), S, W


def _integrate(s0, w0, omega_half, detunings, g1, g2, dt, n_steps, record_every, threads=1):
    """Run ``_rk4`` over fixed detuning blocks; block layout never depends on ``threads``."""
    n_det = detunings.size
    blocks = [slice(i, min(i + BLOCK_SIZE, n_det)) for i in range(0, n_det, BLOCK_SIZE)]

    def work(b):
        return _rk4(
            s0[:, b].copy(), w0[:, b].copy(), omega_half, detunings[b],
            g1, g2, dt, n_steps, record_every,
        )

    if threads > 1 and len(blocks) > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(work, blocks))
    else:
        results = [work(b) for b in blocks]
    rec = results[0][0]
    S = np.concatenate([r[1] for r in results], axis=-1)
    W = np.concatenate([r[2] for r in results], axis=-1)
    return rec, S, W


def _stage_drive(drive: SampledDrive, t0: float, dt: float, n_steps: int) -> np.ndarray:
    t_half = t0 + 0.5 * dt * np.arange(2 * n_steps + 1)
    om = drive.omega
    return np.interp(t_half, drive.t_grid, om.real) + 1j * np.interp(t_half, drive.t_grid, om.imag)


def _relaxation_rates(T1: float, T2: float) -> tuple[float, float]:
    if not (T1 > 0 and T2 > 0):
        raise ParameterError("dynamics", "T1/T2", "must be > 0")
    return 1.0 / T1, 1.0 / T2


def evolve_bloch(
    state: BlochState,
    drive: SampledDrive,
    detuning: float,
    T1: float = math.inf,
    T2: float = math.inf,
    dt: Optional[float] = None,
    record_every: int = 1,
) -> BlochTrajectory:
    """Integrate one detuning class across the drive's time grid.

    ``dt`` defaults to twice the drive sample spacing, so the RK4 midpoints
    fall on drive samples.  Raises ``ParameterError`` if ``dt`` is coarser
    than 0.02 of the fastest of 1/max|Ω|, 1/|Δ| and the pulse rate.
    """
    if dt is None:
        dt = 2 * drive.step
    _check_step(dt, max_step(float(np.max(np.abs(drive.omega))), abs(detuning), drive.rate))
    g1, g2 = _relaxation_rates(T1, T2)
    t0 = float(drive.t_grid[0])
    n_steps = int(math.floor((drive.t_grid[-1] - t0) / dt + 1e-9))
    omega_half = _stage_drive(drive, t0, dt, n_steps)[None, :]
    rec, S, W = _rk4(
        np.array([[state.s]], complex), np.array([[state.w]], float),
        omega_half, np.array([float(detuning)]), g1, g2, dt, n_steps, record_every,
    )
    return BlochTrajectory(t0 + rec * dt, S[:, 0, 0], W[:, 0, 0])


@dataclass(frozen=True)
class InversionProfile:
    """Final inversion w(Δ) after one rephasing pulse, starting from the ground state."""

    detuning: np.ndarray
    w: np.ndarray
    band_halfwidth: float = math.nan  # nominal µβ of the pulse

    @property
    def transfer(self) -> np.ndarray:
        """Excitation probability (1 + w)/2."""
        return (1 + self.w) / 2

    def half_inversion_halfwidth(self) -> float:
        """Mean |Δ| of the w = 0 crossings on either side of line centre."""
        sides = []
        for sign in (1, -1):
            mask = sign * self.detuning >= 0
            d = np.abs(self.detuning[mask])
            w = self.w[mask]
            order = np.argsort(d)
            d, w = d[order], w[order]
            below = np.nonzero(w < 0)[0]
            if below.size == 0 or below[0] == 0:
                continue
            j = below[0]
            sides.append(d[j - 1] + w[j - 1] / (w[j - 1] - w[j]) * (d[j] - d[j - 1]))
        if not sides:
            raise ParameterError("dynamics", "inversion_profile", "no half-inversion crossing found")
        return float(np.mean(sides))

    def rephasing_amplitude(self, signal_tau: Optional[float] = None, n_pulses: int = 2) -> float:
        """Rms echo amplitude factor for ``n_pulses`` identical rephasing pulses.

        Each pulse conjugates a weak coherence with amplitude (1 + w)/2, so the
        echo spectrum is the signal spectrum times transfer**n_pulses.  With
        ``signal_tau`` the average is weighted by the signal spectrum
        exp(−Δ²τ²); otherwise it is flat over the nominal band.
        """
        p = self.transfer**n_pulses
        if signal_tau is not None:
            weight = np.exp(-((self.detuning * signal_tau) ** 2))
        else:
            weight = (np.abs(self.detuning) <= self.band_halfwidth).astype(float)
        return float(np.sqrt(np.sum(weight * p**2) / np.sum(weight)))


def inversion_profile(
    chs: SampledDrive,
    detuning_grid,
    T1: float = math.inf,
    T2: float = math.inf,
    dt: Optional[float] = None,
    threads: int = 1,
) -> InversionProfile:
    """Final w(Δ) of every detuning class after ``chs``.

    Intended for drives that pass ``validate_adiabatic``; nothing is enforced.
    """
    detunings = np.asarray(detuning_grid, dtype=float)
    if dt is None:
        dt = 2 * chs.step
    _check_step(dt, max_step(float(np.max(np.abs(chs.omega))), float(np.max(np.abs(detunings))), chs.rate))
    g1, g2 = _relaxation_rates(T1, T2)
    t0 = float(chs.t_grid[0])
    n_steps = int(math.floor((chs.t_grid[-1] - t0) / dt + 1e-9))
    omega_half = _stage_drive(chs, t0, dt, n_steps)[None, :]
    n = detunings.size
    _, _, W = _integrate(
        np.zeros((1, n), complex), -np.ones((1, n)), omega_half, detunings,
        g1, g2, dt, n_steps, n_steps, threads,
    )
    band = chs.metadata.get("mu", math.nan) * chs.metadata.get("beta", math.nan)
    return InversionProfile(detunings, W[-1, 0], band)


@dataclass(frozen=True)
class EnsembleTrajectory:
    """Detuning-averaged coherence and inversion of the signal and no-signal runs."""

    t_grid: np.ndarray
    mean_s: np.ndarray
    mean_w: np.ndarray
    detuning_grid: np.ndarray
    weights: np.ndarray
    timeline: Timeline
    reference_s: Optional[np.ndarray] = None
    reference_w: Optional[np.ndarray] = None
    line_center_density: float = math.nan  # inhomogeneous density at Δ=0, s/rad
    signal_energy: float = math.nan  # ∫|Ω_signal|² dt
    signal_tau: float = math.nan
    signal_photons: float = 0.0
    metadata: dict = field(default_factory=dict)

    @property
    def signal_s(self) -> np.ndarray:
        """Coherence driven by the signal alone (signal run minus no-signal run)."""
        if self.reference_s is None:
            raise ParameterError("dynamics", "reference_s", "trajectory has no reference run")
        return self.mean_s - self.reference_s


def detuning_weights(medium: Medium, detunings: np.ndarray) -> np.ndarray:
    if medium.inhomogeneous_model == "gaussian":
        w = np.exp(-0.5 * (detunings / medium.inhomogeneous_width) ** 2)
    else:
        w = np.ones_like(detunings)
    return w / w.sum()


def signal_bandwidth(tau: float) -> float:
    """Intensity-spectrum FWHM of the gaussian signal, rad/s."""
    return 4 * math.sqrt(math.log(2)) / tau


def min_pulse_gap(tau: float, beta: float) -> float:
    """Pulse spacing below which the signal or echo overlaps a CHS transfer window.

    The signal occupies about ±2τ and a CHS sweeps the band within about
    ±2/β of its centre.  Closer spacings are accepted but the echo then forms
    while atoms are still being transferred, and its peak drifts off t1 + 2t23.
    """
    return 2 * tau + 2 / beta


def echo_time(timeline: Timeline) -> float:
    return timeline.t_e if timeline.t3 is None else timeline.t_e_prime


def echo_window(timeline: Timeline) -> tuple[float, float]:
    """Interval around the emitted echo, reaching back to the last rephasing pulse."""
    last = timeline.t2 if timeline.t3 is None else timeline.t3
    t_echo = echo_time(timeline)
    h = t_echo - last
    return t_echo - h, t_echo + h


def simulation_window(pulses: Sequence[PulseEnvelope], timeline: Timeline) -> tuple[float, float]:
    signal = next(p for p in pulses if p.kind == "gaussian_signal")
    tau = signal.params["tau"]
    chs = sorted((p for p in pulses if p.kind == "chs"), key=lambda p: p.t_center)
    margins = [chs_halfwidth(p.params["beta"]) * 1.01 for p in chs]
    t_start = min([signal.t_center - 5 * tau] + [p.t_center - m for p, m in zip(chs, margins)])
    t_end = max([echo_time(timeline) + 6 * tau] + [p.t_center + m for p, m in zip(chs, margins)])
    return t_start, t_end


def run_protocol(
    medium: Medium,
    pulses: Sequence[PulseEnvelope],
    timeline: Timeline,
    sim: SimulationParams = SimulationParams(),
    include_reference: bool = True,
) -> EnsembleTrajectory:
    """Drive every detuning class through the signal and the rephasing pulses.

    The signal run and a no-signal reference run are integrated side by side
    with identical arithmetic, so their difference isolates the weak-signal
    response exactly (it vanishes bit-for-bit for a zero-area signal).
    """
    signals = [p for p in pulses if p.kind == "gaussian_signal"]
    if len(signals) != 1:
        raise ParameterError("dynamics", "pulses", "exactly one gaussian_signal pulse required")
    signal = signals[0]
    tau = signal.params["tau"]
    detunings = sim.detuning_grid()
    if sim.n_detunings < 201:
        raise ParameterError("dynamics", "n_detunings", f"must be >= 201 (got {sim.n_detunings})")
    if sim.detuning_span < 3 * signal_bandwidth(tau):
        raise ParameterError(
            "dynamics",
            "detuning_span",
            f"{sim.detuning_span:.3e} rad/s is below 3x the signal bandwidth",
        )

    t_start, t_end = simulation_window(pulses, timeline)
    grid = time_grid(t_start, t_end, sim.dt / 2)
    if grid.size % 2 == 0:
        grid = np.append(grid, grid[-1] + sim.dt / 2)
    n_steps = (grid.size - 1) // 2

    sig_drive = sample_envelope(signal, grid)
    ref_omega = np.zeros(grid.size, complex)
    rate = sig_drive.rate
    for p in pulses:
        if p.kind == "chs":
            d = sample_envelope(p, grid)
            ref_omega = ref_omega + d.omega
            rate = max(rate, d.rate)
    total = ref_omega + sig_drive.omega
    _check_step(
        sim.dt,
        max_step(float(np.max(np.abs(total))), float(np.max(np.abs(detunings))), rate),
    )
    drives = np.stack([total, ref_omega]) if include_reference else total[None, :]

    g1, g2 = _relaxation_rates(medium.T1, medium.T2)
    n_runs = drives.shape[0]
    n = detunings.size
    rec, S, W = _integrate(
        np.zeros((n_runs, n), complex), -np.ones((n_runs, n)), drives, detunings,
        g1, g2, sim.dt, n_steps, sim.record_every, sim.threads,
    )
    weights = detuning_weights(medium, detunings)
    mean_s = S @ weights
    mean_w = W @ weights
    spacing = detunings[1] - detunings[0]
    g0 = float(np.interp(0.0, detunings, weights)) / spacing
    return EnsembleTrajectory(
        t_grid=grid[0] + rec * sim.dt,
        mean_s=mean_s[:, 0],
        mean_w=mean_w[:, 0],
        detuning_grid=detunings,
        weights=weights,
        timeline=timeline,
        reference_s=mean_s[:, 1] if include_reference else None,
        reference_w=mean_w[:, 1] if include_reference else None,
        line_center_density=g0,
        signal_energy=sig_drive.energy,
        signal_tau=tau,
        signal_photons=signal.params["photon_number"],
        metadata={"dt": sim.dt, "n_steps": n_steps},
    )


def analytic_efficiency(alpha_L: float, t23: float, T2: float) -> float:
    """(αL)²·exp(−αL − 4·t23/T2): ROSE retrieval efficiency for ideal rephasing."""
    return alpha_L**2 * math.exp(-alpha_L - 4 * t23 / T2)


def slice_efficiency(
    medium: Medium,
    timeline: Timeline,
    chs_quality: Optional[InversionProfile] = None,
    signal_tau: Optional[float] = None,
) -> float:
    """Echo/input intensity ratio from a forward-Euler slice propagation model.

    The signal loses a fraction α·dz/2 of its amplitude in each slice, every
    slice radiates an echo proportional to α·dz times the local signal, and
    that echo is attenuated (ROSE, ground-state medium) or amplified (two-pulse
    echo, inverted medium) by the same per-slice factor on its way out.
    Coherence decay and imperfect rephasing scale each slice's source.
    """
    n = int(medium.n_slices)
    if n < 16:
        raise ParameterError("dynamics", "n_slices", f"must be >= 16 (got {n})")
    if medium.alpha_L == 0:
        return 0.0
    rose = timeline.t3 is not None
    storage = timeline.t23 if rose else timeline.t12
    alpha_dz = medium.alpha_L / n
    x = alpha_dz / 2
    j = np.arange(n)
    inward = (1 - x) ** j
    outward = (1 - x) ** (n - 1 - j) if rose else (1 + x) ** (n - 1 - j)
    q = 1.0
    if chs_quality is not None:
        q = chs_quality.rephasing_amplitude(signal_tau, n_pulses=2 if rose else 1)
    amplitude = np.sum(alpha_dz * inward * outward) * q * math.exp(-2 * storage / medium.T2)
    return float(amplitude**2)


def bloch_efficiency(traj: EnsembleTrajectory, medium: Medium) -> float:
    """Retrieval efficiency read directly off the simulated ensemble coherence.

    A thin slice radiates Ω_echo = α·dz·signal_s/(2π·g0), with g0 the line
    centre density; undepleted rephasing pulses and flat absorption then give
    ``(αL)² e^{−αL} ∫|signal_s/(2π g0)|² / ∫|Ω_in|²`` over the echo window.
    """
    if traj.timeline.t3 is None:
        raise ParameterError("dynamics", "timeline", "bloch_efficiency needs the ROSE sequence")
    lo, hi = echo_window(traj.timeline)
    m = (traj.t_grid >= lo) & (traj.t_grid <= hi)
    field_echo = traj.signal_s[m] / (TWO_PI * traj.line_center_density)
    ratio = trapezoid(np.abs(field_echo) ** 2, traj.t_grid[m]) / traj.signal_energy
    return float(medium.alpha_L**2 * math.exp(-medium.alpha_L) * ratio)


@dataclass(frozen=True)
class EchoEmission:
    t: np.ndarray
    flux: np.ndarray  # photons per second leaving the crystal
    photons_total: float
    efficiency: float

    @property
    def peak_time(self) -> float:
        return float(self.t[np.argmax(self.flux)]) if self.photons_total > 0 else math.nan


def echo_emission(
    traj: EnsembleTrajectory,
    medium: Medium,
    match: MatchReport,
    input_photons: float,
    efficiency: Optional[float] = None,
    chs_quality: Optional[InversionProfile] = None,
) -> EchoEmission:
    """Echo photon flux: the shape of |signal_s|² scaled to input_photons × efficiency.

    A silenced geometry radiates nothing.  A marginal match is refused rather
    than guessed at.  ``efficiency`` defaults to ``slice_efficiency``.
    """
    if match.classification == "marginal":
        raise ParameterError(
            "dynamics", "match", f"marginal phase matching (mismatch {match.mismatch_phase:.3g} rad)"
        )
    t = traj.t_grid
    if efficiency is None:
        efficiency = slice_efficiency(medium, traj.timeline, chs_quality, traj.signal_tau)
    if match.silenced or input_photons == 0:
        return EchoEmission(t, np.zeros(t.size), 0.0, float(efficiency))
    lo, hi = echo_window(traj.timeline)
    shape = np.where((t >= lo) & (t <= hi), np.abs(traj.signal_s) ** 2, 0.0)
    norm = trapezoid(shape, t)
    if norm == 0:
        return EchoEmission(t, np.zeros(t.size), 0.0, float(efficiency))
    total = input_photons * efficiency
    return EchoEmission(t, shape * (total / norm), float(total), float(efficiency))
