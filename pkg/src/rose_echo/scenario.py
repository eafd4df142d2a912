"""Scenario description and its JSON config format.

Every dimensioned value in a config carries an explicit unit suffix
("10 us", "800 kHz", "8 mm").  Cyclic frequency units are converted to
rad/s.  ``Scenario.to_dict`` writes the fully resolved scenario back in SI
units using ``repr`` floats, so reloading it reproduces the run bit-exactly.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, fields, replace
from pathlib import Path
from typing import Any, Optional

from . import model
from .dynamics import SimulationParams
from .model import (
    BeamGeometry,
    DetectionChain,
    Medium,
    ParameterError,
    PulseEnvelope,
    Timeline,
    validate_scenario,
)
from .noise import NoiseModel, observed_se_calibration
from .units import UnitError, format_quantity, parse_quantity

PAPER_DEFAULTS = "paper-defaults"

# field name -> dimension (None = dimensionless number)
_MEDIUM = {
    "alpha_L": None,
    "length": "length",
    "T1": "time",
    "T2": "time",
    "n_slices": None,
    "inhomogeneous_model": "text",
    "inhomogeneous_width": "angular_frequency",
}
_TIMELINE = {"t1": "time", "t2": "time", "t3": "time"}
_SIGNAL = {"tau": "time", "photon_number": "photons", "reference_area": "angle", "t_center": "time"}
_CHS = {"omega0": "angular_frequency", "beta": "angular_frequency", "mu": None, "t_center": "time"}
_DETECTION = {
    "eta_photodetector": None,
    "eta_collection": None,
    "spectral_filter_factor": None,
    "bin_width": "time",
    "n_sequences": None,
    "rep_rate": "rate",
}
_NOISE = {
    "n_e_after_one_chs": None,
    "n_e_after_two_chs": None,
    "coherent_artifact_photons": "photons",
    "se_calibration": None,
    "artifact_delay": "time",
}
_SIMULATION = {
    "dt": "time",
    "detuning_span": "angular_frequency",
    "n_detunings": None,
    "record_every": None,
    "seed": None,
    "threads": None,
}
_INTEGER = {"n_slices", "n_sequences", "n_detunings", "record_every", "seed", "threads"}


def _read(section: str, raw: dict, schema: dict) -> dict:
    if not isinstance(raw, dict):
        raise ParameterError("config", section, "must be an object")
    unknown = set(raw) - set(schema)
    if unknown:
        raise ParameterError("config", section, f"unknown keys {sorted(unknown)}")
    out = {}
    for key, value in raw.items():
        dim = schema[key]
        where = f"{section}.{key}"
        try:
            if value is None:
                out[key] = None
            elif dim == "text":
                out[key] = str(value)
            elif dim == "photons":
                if isinstance(value, str):
                    number, _, unit = value.strip().partition(" ")
                    if unit.strip() not in ("photons", "photon", ""):
                        raise UnitError(f"expected photons, got {value!r}")
                    value = float(number)
                out[key] = float(value)
            elif dim is None:
                if isinstance(value, bool) or not isinstance(value, (int, float)):
                    raise UnitError(f"expected a plain number, got {value!r}")
                out[key] = int(value) if key in _INTEGER else float(value)
            else:
                out[key] = parse_quantity(value, dim)
        except (UnitError, ValueError) as exc:
            raise ParameterError("config", where, str(exc)) from None
    return out


def _write(values: dict, schema: dict) -> dict:
    out = {}
    for key, value in values.items():
        dim = schema[key]
        if value is None or dim in (None, "text", "photons"):
            out[key] = value
        else:
            out[key] = format_quantity(value, dim)
    return out


@dataclass(frozen=True)
class Scenario:
    medium: Medium = Medium()
    pulses: tuple = ()
    timeline: Timeline = Timeline()
    geometry: BeamGeometry = BeamGeometry()
    detection: DetectionChain = DetectionChain()
    noise: NoiseModel = field(default_factory=NoiseModel)
    simulation: SimulationParams = SimulationParams()

    def violations(self) -> list[str]:
        return (
            validate_scenario(self.medium, self.pulses, self.timeline)
            + self.detection.violations()
            + self.noise.violations()
        )

    @property
    def signal(self) -> PulseEnvelope:
        return next(p for p in self.pulses if p.kind == "gaussian_signal")

    @property
    def rephasing(self) -> list[PulseEnvelope]:
        return sorted((p for p in self.pulses if p.kind == "chs"), key=lambda p: p.t_center)

    def with_wavevectors(self) -> tuple:
        """Pulses with the geometry's k1 (signal), k2 and k3 (rephasing) attached."""
        k1, k2, k3 = self.geometry.wavevectors()
        ks = iter([k2, k3])
        out = []
        for p in sorted(self.pulses, key=lambda p: p.t_center):
            out.append(replace(p, wavevector=k1 if p.kind == "gaussian_signal" else next(ks)))
        return tuple(out)

    # config IO

    def to_dict(self) -> dict:
        m = self.medium
        medium = _write(
            {
                "alpha_L": m.alpha_L,
                "length": m.length_L,
                "T1": m.T1,
                "T2": m.T2,
                "n_slices": m.n_slices,
                "inhomogeneous_model": m.inhomogeneous_model,
                "inhomogeneous_width": m.inhomogeneous_width,
            },
            _MEDIUM,
        )
        pulses = []
        for p in sorted(self.pulses, key=lambda p: p.t_center):
            schema = _SIGNAL if p.kind == "gaussian_signal" else _CHS
            d = _write({**dict(p.params), "t_center": p.t_center}, schema)
            pulses.append({"kind": p.kind, **d})
        tl = self.timeline
        g = self.geometry
        return {
            "medium": medium,
            "timeline": _write({"t1": tl.t1, "t2": tl.t2, "t3": tl.t3}, _TIMELINE),
            "pulses": pulses,
            "geometry": {
                "wavelength": format_quantity(g.wavelength, "length"),
                "k1": list(g.k1),
                "k2": list(g.k2),
                "k3": list(g.k3),
            },
            "detection": _write(
                {f.name: getattr(self.detection, f.name) for f in fields(DetectionChain)}, _DETECTION
            ),
            "noise": _write(
                {k: getattr(self.noise, k) for k in _NOISE}, _NOISE
            ),
            "simulation": _write(
                {f.name: getattr(self.simulation, f.name) for f in fields(SimulationParams)},
                _SIMULATION,
            ),
        }

    @classmethod
    def from_dict(cls, raw: dict) -> "Scenario":
        if not isinstance(raw, dict):
            raise ParameterError("config", "root", "must be an object")
        unknown = set(raw) - {"medium", "timeline", "pulses", "geometry", "detection", "noise", "simulation"}
        if unknown:
            raise ParameterError("config", "root", f"unknown sections {sorted(unknown)}")
        base = paper_defaults()

        med = _read("medium", raw.get("medium", {}), _MEDIUM)
        if "length" in med:
            med["length_L"] = med.pop("length")
        medium = replace(base.medium, **med)

        tl = _read("timeline", raw.get("timeline", {}), _TIMELINE)
        timeline = replace(base.timeline, **tl)

        if "pulses" in raw:
            pulses = _read_pulses(raw["pulses"], timeline)
        else:
            pulses = default_pulses(timeline)

        geometry = base.geometry
        if "geometry" in raw:
            graw = raw["geometry"]
            unknown = set(graw) - {"wavelength", "k1", "k2", "k3"}
            if unknown:
                raise ParameterError("config", "geometry", f"unknown keys {sorted(unknown)}")
            kw = {}
            if "wavelength" in graw:
                try:
                    kw["wavelength"] = parse_quantity(graw["wavelength"], "length")
                except UnitError as exc:
                    raise ParameterError("config", "geometry.wavelength", str(exc)) from None
            for name in ("k1", "k2", "k3"):
                if name in graw:
                    vec = graw[name]
                    if not (isinstance(vec, list) and len(vec) == 3):
                        raise ParameterError("config", f"geometry.{name}", "must be a 3-element list")
                    kw[name] = tuple(float(x) for x in vec)
            geometry = replace(geometry, **kw)

        detection = replace(base.detection, **_read("detection", raw.get("detection", {}), _DETECTION))
        noise = replace(base.noise, **_read("noise", raw.get("noise", {}), _NOISE))
        simulation = replace(base.simulation, **_read("simulation", raw.get("simulation", {}), _SIMULATION))
        return cls(medium, pulses, timeline, geometry, detection, noise, simulation)


def _read_pulses(raw_pulses, timeline: Timeline) -> tuple:
    if not isinstance(raw_pulses, list):
        raise ParameterError("config", "pulses", "must be a list")
    chs_times = [timeline.t2] + ([] if timeline.t3 is None else [timeline.t3])
    n_chs = 0
    out = []
    for i, raw in enumerate(raw_pulses):
        if not isinstance(raw, dict) or "kind" not in raw:
            raise ParameterError("config", f"pulses[{i}]", "must be an object with a 'kind'")
        body = {k: v for k, v in raw.items() if k != "kind"}
        kind = raw["kind"]
        if kind == "gaussian_signal":
            p = _read(f"pulses[{i}]", body, _SIGNAL)
            t_c = p.pop("t_center", None)
            p = {"tau": model.SIGNAL_TAU, "photon_number": model.SIGNAL_PHOTONS,
                 "reference_area": model.SIGNAL_REFERENCE_AREA, **p}
            out.append(PulseEnvelope.gaussian(timeline.t1 if t_c is None else t_c, **p))
        elif kind == "chs":
            p = _read(f"pulses[{i}]", body, _CHS)
            t_c = p.pop("t_center", None)
            if t_c is None:
                t_c = chs_times[n_chs] if n_chs < len(chs_times) else math.nan
            n_chs += 1
            out.append(PulseEnvelope.chs(t_c, **p))
        else:
            raise ParameterError("config", f"pulses[{i}].kind", f"unknown pulse kind {kind!r}")
    return tuple(out)


def default_pulses(timeline: Timeline) -> tuple:
    pulses = [PulseEnvelope.gaussian(timeline.t1), PulseEnvelope.chs(timeline.t2)]
    if timeline.t3 is not None:
        pulses.append(PulseEnvelope.chs(timeline.t3))
    return tuple(pulses)


def paper_defaults(timeline: Optional[Timeline] = None) -> Scenario:
    """Low-level ROSE run: 14-photon τ = 2 µs signal, CHS pair at 10 and 30 µs.

    The SE rate is calibrated to the observed 0.2 photons per bin after one
    pulse, and n_e after the pulse pair is the observed 1/3.
    """
    timeline = Timeline() if timeline is None else timeline
    delta = 2 * model.CHS_MU * model.CHS_BETA
    noise = NoiseModel(se_calibration=observed_se_calibration(model.ALPHA_L, delta, model.BIN_WIDTH))
    return Scenario(
        medium=Medium(),
        pulses=default_pulses(timeline),
        timeline=timeline,
        geometry=BeamGeometry(),
        detection=DetectionChain(),
        noise=noise,
        simulation=SimulationParams(),
    )


def load_scenario(source: Any) -> Scenario:
    """Scenario from a JSON path, a dict, or the ``"paper-defaults"`` preset name.

    A JSON file may also be a metrics record, whose embedded ``scenario`` is used.
    """
    if isinstance(source, dict):
        raw = source
    elif str(source) == PAPER_DEFAULTS:
        return paper_defaults()
    else:
        try:
            raw = json.loads(Path(source).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise ParameterError("config", str(source), f"cannot read config: {exc}") from None
    if isinstance(raw, dict) and "scenario" in raw and "medium" not in raw:
        raw = raw["scenario"]
    return Scenario.from_dict(raw)
