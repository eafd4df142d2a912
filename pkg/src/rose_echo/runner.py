"""End-to-end pipelines behind the CLI subcommands.

A run splits into a deterministic part (Bloch ensemble, echo emission and
expected photons per bin) and a seeded Poisson sampling part.  The expensive
deterministic part is computed once and reused across seeds.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Optional

import numpy as np
from scipy.integrate import cumulative_trapezoid
from scipy.special import ndtr

from . import noise as noise_mod
from .counting import (
    RNG_ALGORITHM,
    CountHistogram,
    fit_exponential_decay,
    gaussian_mode_extract,
    normalize_to_crystal,
    simulate_counts,
)
from .dynamics import (
    EchoEmission,
    EnsembleTrajectory,
    InversionProfile,
    analytic_efficiency,
    bloch_efficiency,
    echo_emission,
    echo_time,
    inversion_profile,
    run_protocol,
    slice_efficiency,
)
from .model import TWO_PI, ParameterError, PulseEnvelope, Timeline
from .phasematch import MatchReport, protocol_match
from .pulses import chs_halfwidth, filtered_pulse_analysis, make_chs, time_grid, validate_adiabatic
from .scenario import Scenario, paper_defaults

FIG4_WINDOW = 1.5e-3
# The SE tail is fitted from this long after the last pulse, clear of its wing.
FIG4_FIT_DELAY = 20e-6


def _check_valid(scenario: Scenario) -> None:
    problems = scenario.violations()
    if problems:
        parameter = problems[0].split(":", 1)[0]
        raise ParameterError("scenario", parameter, "; ".join(problems))


def _bin_edges(t_lo: float, t_hi: float, origin: float, width: float) -> np.ndarray:
    """Bin edges of ``width`` aligned to ``origin`` and lying inside [t_lo, t_hi]."""
    k0 = math.ceil((t_lo - origin) / width - 1e-9)
    k1 = math.floor((t_hi - origin) / width + 1e-9)
    return origin + width * np.arange(k0, k1 + 1)


def _bin_integral(t, flux, edges) -> np.ndarray:
    cum = cumulative_trapezoid(flux, t, initial=0.0)
    return np.diff(np.interp(edges, t, cum))


def _gaussian_bins(n_photons: float, t_center: float, tau: float, edges) -> np.ndarray:
    """Photons per bin of an intensity profile exp(−(t − t_c)²/τ²) holding ``n_photons``."""
    return n_photons * np.diff(ndtr((np.asarray(edges) - t_center) * math.sqrt(2) / tau))


@dataclass(frozen=True)
class Expected:
    """Deterministic part of a run: expected in-crystal photons per bin per sequence."""

    scenario: Scenario
    trajectory: EnsembleTrajectory
    emission: EchoEmission
    profile: InversionProfile
    match: dict
    bin_edges: np.ndarray
    signal_run: np.ndarray
    reference_run: np.ndarray
    components: dict = field(default_factory=dict)
    efficiencies: dict = field(default_factory=dict)

    @property
    def echo_time(self) -> float:
        return echo_time(self.scenario.timeline)


def compute_expected(scenario: Scenario) -> Expected:
    _check_valid(scenario)
    medium, tl, sim = scenario.medium, scenario.timeline, scenario.simulation
    pulses = scenario.with_wavevectors()
    signal = scenario.signal
    chs = scenario.rephasing
    tau = signal.params["tau"]
    n_in = signal.params["photon_number"]

    ks = [p.wavevector for p in pulses]  # time order: signal, CHS1, CHS2
    match = protocol_match(ks[0], ks[1], ks[2] if len(ks) > 2 else None, medium.length_L)
    emitted = match["rose"] if tl.t3 is not None else match["2pe"]

    traj = run_protocol(medium, pulses, tl, sim)

    p0 = chs[0].params
    half = chs_halfwidth(p0["beta"]) * 1.01
    grid = time_grid(-half, half, sim.dt / 2)
    drive = make_chs(p0["omega0"], p0["beta"], p0["mu"], 0.0, grid)
    # Relaxation-free: the slice model already charges e^(−2 t23/T2) for the storage.
    profile = inversion_profile(drive, sim.detuning_grid(), dt=sim.dt, threads=sim.threads)

    eff = slice_efficiency(medium, tl, profile, tau)
    effs = {"slice": eff}
    if tl.t3 is not None:
        effs["analytic"] = analytic_efficiency(medium.alpha_L, tl.t23, medium.T2)
        effs["bloch"] = bloch_efficiency(traj, medium)
    emission = echo_emission(traj, medium, emitted, n_in, eff)

    det = scenario.detection
    edges = _bin_edges(traj.t_grid[0], traj.t_grid[-1], tl.t1, det.bin_width)
    centers = 0.5 * (edges[:-1] + edges[1:])
    delta = 2 * p0["mu"] * p0["beta"]
    components = {
        "transmitted": _gaussian_bins(n_in * math.exp(-medium.alpha_L), tl.t1, tau, edges),
        "echo": _bin_integral(emission.t, emission.flux, edges),
        "se": noise_mod.se_trace(centers, [p.t_center for p in chs], scenario.noise, medium, delta, det.bin_width),
        "artifact": noise_mod.coherent_artifact(scenario.noise, tl, edges, p0["beta"]),
        "stray": noise_mod.stray_light(scenario.noise, centers),
    }
    background = components["se"] + components["artifact"] + components["stray"]
    signal_run = components["transmitted"] + components["echo"] + background
    return Expected(scenario, traj, emission, profile, match, edges, signal_run, background, components, effs)


def _detected(expected_in_crystal, scenario: Scenario) -> np.ndarray:
    return noise_mod.apply_detection_chain(expected_in_crystal, scenario.detection)


def sample(expected: Expected, seed: int, replicate: int = 0) -> dict:
    """One seeded Monte Carlo realisation of the signal and reference histograms."""
    sc = expected.scenario
    det = sc.detection
    raw, norm = {}, {}
    for stream, name in ((0, "signal"), (1, "reference")):
        lam = _detected(getattr(expected, f"{name}_run"), sc)
        raw[name] = simulate_counts(lam, det.n_sequences, seed, expected.bin_edges, stream=2 * replicate + stream)
        norm[name] = normalize_to_crystal(raw[name], det)
    return {"raw": raw, "normalized": norm, **extract(norm["signal"], norm["reference"], expected)}


def extract(signal: CountHistogram, reference: CountHistogram, expected: Expected) -> dict:
    tl = expected.scenario.timeline
    tau = expected.scenario.signal.params["tau"]
    t_echo = echo_time(tl)
    transmitted = gaussian_mode_extract(signal, tl.t1, tau)
    background = gaussian_mode_extract(reference, t_echo, tau)
    echo = gaussian_mode_extract(signal, t_echo, tau) - background
    return {
        "transmitted": transmitted,
        "echo": echo,
        "background": background,
        "snr": echo / background if background > 0 else math.nan,
    }


def expected_extraction(expected: Expected) -> dict:
    """Mode extraction applied to the noiseless expected histograms."""
    def hist(values):
        return CountHistogram(
            expected.bin_edges, values, expected.scenario.detection.n_sequences,
            "photons_per_sequence_in_crystal", expected.scenario.detection.overall_efficiency,
        )

    return extract(hist(expected.signal_run), hist(expected.reference_run), expected)


def _metrics(expected: Expected, sampled: dict, seed: int) -> dict:
    sc = expected.scenario
    tl = sc.timeline
    t_expected = echo_time(tl)
    peak = expected.emission.peak_time
    noiseless = expected_extraction(expected)
    return {
        "efficiency": expected.efficiencies["slice"],
        "efficiency_analytic": expected.efficiencies.get("analytic"),
        "efficiency_bloch": expected.efficiencies.get("bloch"),
        "rephasing_amplitude": expected.profile.rephasing_amplitude(
            sc.signal.params["tau"], tl.n_rephasing
        ),
        "echo_time_s": None if math.isnan(peak) else peak,
        "echo_time_expected_s": t_expected,
        "timing_error_s": None if math.isnan(peak) else peak - t_expected,
        "phase_match": {name: r.as_dict() for name, r in expected.match.items()},
        "signal_in": sc.signal.params["photon_number"],
        "echo_photons_emitted": expected.emission.photons_total,
        "transmitted": sampled["transmitted"],
        "echo": sampled["echo"],
        "background": sampled["background"],
        "snr": None if math.isnan(sampled["snr"]) else sampled["snr"],
        "expected": {k: (None if isinstance(v, float) and math.isnan(v) else v) for k, v in noiseless.items()},
        "seed": seed,
        "rng": RNG_ALGORITHM,
        "n_sequences": sc.detection.n_sequences,
        "scenario": sc.to_dict(),
    }


def _resolve(scenario: Scenario, seed: Optional[int], threads: Optional[int]) -> Scenario:
    sim = scenario.simulation
    if seed is not None:
        sim = replace(sim, seed=int(seed))
    if threads is not None:
        sim = replace(sim, threads=int(threads))
    return replace(scenario, simulation=sim)


def _header(scenario: Scenario) -> list[str]:
    return [
        "# scenario=" + json.dumps(scenario.to_dict(), sort_keys=True, separators=(",", ":")),
        f"# seed={scenario.simulation.seed}",
        f"# rng={RNG_ALGORITHM}",
    ]


def write_csv(path: Path, scenario: Scenario, columns: list[str], rows) -> None:
    with open(path, "w", newline="") as fh:
        for line in _header(scenario):
            fh.write(line + "\n")
        writer = csv.writer(fh)
        writer.writerow(columns)
        for row in rows:
            writer.writerow([repr(float(x)) if not isinstance(x, (int, np.integer)) else int(x) for x in row])


def read_csv(path) -> tuple[dict, np.ndarray]:
    """Header metadata (``scenario`` parsed) and the numeric table of an output CSV."""
    meta = {}
    with open(path) as fh:
        lines = fh.read().splitlines()
    body = []
    for line in lines:
        if line.startswith("# "):
            key, _, value = line[2:].partition("=")
            meta[key] = json.loads(value) if key == "scenario" else value
        else:
            body.append(line)
    meta["columns"] = body[0].split(",")
    table = np.array([[float(x) for x in r.split(",")] for r in body[1:]])
    return meta, table


def to_jsonable(obj):
    """Plain JSON types; NaN becomes null."""
    if isinstance(obj, dict):
        return {str(k): to_jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple, np.ndarray)):
        return [to_jsonable(v) for v in obj]
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        return None if math.isnan(obj) else float(obj)
    return obj


def write_json(path: Path, obj) -> None:
    Path(path).write_text(json.dumps(to_jsonable(obj), indent=2, sort_keys=True) + "\n")


def _histogram_rows(raw: CountHistogram, norm: CountHistogram, expected_in_crystal):
    return zip(raw.bin_starts, raw.counts, norm.counts, expected_in_crystal)


HIST_COLUMNS = ["t_bin_start_s", "counts_raw", "photons_per_sequence", "expected_photons_per_sequence"]


@dataclass
class SimulateResult:
    expected: Expected
    sampled: dict
    metrics: dict
    files: list = field(default_factory=list)


def run_simulate(
    scenario: Scenario,
    seed: Optional[int] = None,
    out_dir=None,
    threads: Optional[int] = None,
) -> SimulateResult:
    """Full pipeline for one scenario; writes trajectory, histograms and metrics if ``out_dir``."""
    scenario = _resolve(scenario, seed, threads)
    seed = scenario.simulation.seed
    expected = compute_expected(scenario)
    sampled = sample(expected, seed)
    metrics = _metrics(expected, sampled, seed)
    result = SimulateResult(expected, sampled, metrics)
    if out_dir is not None:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        traj = expected.trajectory
        write_csv(
            out / "trajectory.csv", scenario,
            ["t_s", "abs_mean_s", "mean_w", "echo_flux_per_s"],
            zip(traj.t_grid, np.abs(traj.mean_s), traj.mean_w, expected.emission.flux),
        )
        for name, fname in (("signal", "histogram.csv"), ("reference", "reference_histogram.csv")):
            write_csv(out / fname, scenario, HIST_COLUMNS, _histogram_rows(
                sampled["raw"][name], sampled["normalized"][name], getattr(expected, f"{name}_run")))
        write_json(out / "metrics.json", metrics)
        result.files = [out / f for f in ("trajectory.csv", "histogram.csv", "reference_histogram.csv", "metrics.json")]
    return result


def run_reproduce_fig5(
    n_seeds: int = 20,
    seed: Optional[int] = None,
    out_dir=None,
    threads: Optional[int] = None,
    scenario: Optional[Scenario] = None,
) -> dict:
    """Low-level ROSE run at the default scenario, averaged over ``n_seeds`` realisations.

    Replicate i draws streams (2i, 2i + 1) of the one seed, so the whole
    ensemble is a pure function of (scenario, seed).
    """
    if n_seeds < 1:
        raise ParameterError("cli", "n_seeds", "must be >= 1")
    scenario = _resolve(paper_defaults() if scenario is None else scenario, seed, threads)
    seed = scenario.simulation.seed
    expected = compute_expected(scenario)
    runs = [sample(expected, seed, i) for i in range(n_seeds)]
    keys = ("transmitted", "echo", "background", "snr")
    per_seed = {k: [float(r[k]) for r in runs] for k in keys}
    metrics = {
        "signal_in": scenario.signal.params["photon_number"],
        **{k: float(np.mean(v)) for k, v in per_seed.items()},
        "std": {k: float(np.std(v, ddof=1)) if n_seeds > 1 else 0.0 for k, v in per_seed.items()},
        "per_seed": per_seed,
        "n_seeds": n_seeds,
        "efficiency": expected.efficiencies["slice"],
        "efficiency_analytic": expected.efficiencies.get("analytic"),
        "efficiency_bloch": expected.efficiencies.get("bloch"),
        "echo_time_s": expected.emission.peak_time,
        "echo_time_expected_s": expected.echo_time,
        "expected": expected_extraction(expected),
        "seed": seed,
        "rng": RNG_ALGORITHM,
        "scenario": scenario.to_dict(),
    }
    if out_dir is not None:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        for name, fname in (("signal", "fig5_histogram.csv"), ("reference", "fig5_reference_histogram.csv")):
            write_csv(out / fname, scenario, HIST_COLUMNS, _histogram_rows(
                runs[0]["raw"][name], runs[0]["normalized"][name], getattr(expected, f"{name}_run")))
        write_json(out / "fig5_metrics.json", metrics)
    return metrics


def fig4_scenario(variant: str, scenario: Optional[Scenario] = None) -> Scenario:
    """Default scenario with one or two rephasing pulses and no signal photons."""
    if variant not in ("one_chs", "two_chs"):
        raise ParameterError("cli", "variant", f"must be one_chs or two_chs (got {variant!r})")
    base = paper_defaults() if scenario is None else scenario
    tl = base.timeline
    if variant == "one_chs":
        tl = Timeline(tl.t1, tl.t2, None)
    elif tl.t3 is None:
        raise ParameterError("cli", "timeline", "two_chs needs t3")
    chs = [p for p in base.rephasing][: tl.n_rephasing]
    times = [tl.t2, tl.t3][: tl.n_rephasing]
    sig = base.signal
    pulses = (replace(sig, params={**sig.params, "photon_number": 0.0}),) + tuple(
        replace(p, t_center=t) for p, t in zip(chs, times)
    )
    return replace(base, timeline=tl, pulses=pulses)


def run_reproduce_fig4(
    variant: str,
    seed: Optional[int] = None,
    out_dir=None,
    scenario: Optional[Scenario] = None,
    window: float = FIG4_WINDOW,
) -> dict:
    """Expected SE (plus artifact) trace after the rephasing pulses and one realisation.

    The tail after the last pulse is fitted with an exponential; ``plateau``
    is the fit extrapolated back to that pulse, in photons per bin.
    """
    sc = _resolve(fig4_scenario(variant, scenario), seed, None)
    _check_valid(sc)
    seed = sc.simulation.seed
    tl, det, medium = sc.timeline, sc.detection, sc.medium
    chs = sc.rephasing
    p0 = chs[0].params
    last = chs[-1].t_center
    edges = _bin_edges(tl.t2 - FIG4_FIT_DELAY, last + window, tl.t1, det.bin_width)
    centers = 0.5 * (edges[:-1] + edges[1:])
    delta = 2 * p0["mu"] * p0["beta"]
    se = noise_mod.se_trace(centers, [p.t_center for p in chs], sc.noise, medium, delta, det.bin_width)
    artifact = noise_mod.coherent_artifact(sc.noise, tl, edges, p0["beta"])
    stray = noise_mod.stray_light(sc.noise, centers)
    expected = se + artifact + stray

    raw = simulate_counts(_detected(expected, sc), det.n_sequences, seed, edges)
    norm = normalize_to_crystal(raw, det)

    fit = centers >= last + FIG4_FIT_DELAY
    y = norm.counts[fit]
    # Poisson weights from a first unweighted fit; weighting by the observed
    # counts themselves would bias the decay constant low.
    scale = det.n_sequences * det.overall_efficiency
    amp, T1_fit, _ = fit_exponential_decay(centers[fit], y)
    model_y = amp * np.exp(-(centers[fit] - centers[fit][0]) / T1_fit)
    amp, T1_fit, T1_err = fit_exponential_decay(centers[fit], y, np.sqrt(model_y / scale))
    plateau = amp * math.exp((centers[fit][0] - last) / T1_fit)
    metrics = {
        "variant": variant,
        "plateau": plateau,
        "plateau_expected": float(
            noise_mod.se_trace([last], [p.t_center for p in chs], sc.noise, medium, delta, det.bin_width)[0]
        ),
        "fitted_T1_s": T1_fit,
        "fitted_T1_err_s": T1_err,
        "configured_T1_s": medium.T1,
        "artifact_photons": float(artifact.sum()),
        "detected_events_first_bin_after_pulse": int(raw.counts[np.searchsorted(centers, last)]),
        "seed": seed,
        "rng": RNG_ALGORITHM,
        "scenario": sc.to_dict(),
    }
    if out_dir is not None:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        write_csv(out / f"fig4_{variant}.csv", sc, HIST_COLUMNS, _histogram_rows(raw, norm, expected))
        write_json(out / f"fig4_{variant}_metrics.json", metrics)
    return metrics


def design_pulse(
    omega0: float,
    beta: float,
    mu: float,
    T2: float,
    signal_tau: float,
    simulate: bool = True,
    dt: float = 2e-9,
    detuning_span: float = TWO_PI * 3e6,
    n_detunings: int = 401,
    threads: int = 1,
) -> dict:
    """Adiabaticity margins, band, signal stretching and (optionally) the simulated inversion."""
    report = validate_adiabatic(omega0, beta, mu, T2)
    band = mu * beta
    stretch = filtered_pulse_analysis(signal_tau, band)
    out = {
        "omega0_rad_s": omega0,
        "beta_rad_s": beta,
        "mu": mu,
        "T2_s": T2,
        "band_halfwidth_rad_s": band,
        "band_fullwidth_Hz": 2 * band / TWO_PI,
        "duration_1_over_beta_s": 1 / beta,
        "adiabatic": {
            "mu_ratio": report.mu_ratio,
            "adiabatic_ratio": report.adiabatic_ratio,
            "slow_ratio": report.slow_ratio,
            "checks": report.checks,
            "failures": report.failures,
            "passed": report.passed,
        },
        "signal_tau_s": signal_tau,
        "stretch_factor": stretch.stretch_factor,
        "energy_fraction": stretch.energy_fraction,
    }
    if simulate:
        half = chs_halfwidth(beta) * 1.01
        drive = make_chs(omega0, beta, mu, 0.0, time_grid(-half, half, dt / 2))
        grid = np.linspace(-detuning_span / 2, detuning_span / 2, n_detunings)
        prof = inversion_profile(drive, grid, dt=dt, threads=threads)
        out["w_center"] = float(np.interp(0.0, prof.detuning, prof.w))
        out["half_inversion_halfwidth_rad_s"] = prof.half_inversion_halfwidth()
        out["half_inversion_over_mu_beta"] = prof.half_inversion_halfwidth() / band
        out["rephasing_amplitude"] = prof.rephasing_amplitude(signal_tau, 2)
    return out


def phase_match_report(scenario: Scenario) -> dict:
    _check_valid(scenario)
    pulses = scenario.with_wavevectors()
    ks = [p.wavevector for p in pulses]
    k3 = ks[2] if len(ks) > 2 else None
    reports: dict = protocol_match(ks[0], ks[1], k3, scenario.medium.length_L)
    return {name: r.as_dict() for name, r in reports.items()}
