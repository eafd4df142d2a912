"""Simulator for revival-of-silenced-echo (ROSE) photon-echo memories.

Two-level inhomogeneously broadened atoms driven by a weak gaussian signal
and complex-hyperbolic-secant rephasing pulses, with the spontaneous-emission
background and the photon-counting detection that follow.
"""

from .model import (
    BeamGeometry,
    DetectionChain,
    Medium,
    ParameterError,
    PulseEnvelope,
    Timeline,
    WaveVector,
    validate_scenario,
)
from .noise import NoiseModel
from .scenario import Scenario, load_scenario, paper_defaults

__version__ = "0.1.0"

__all__ = [
    "BeamGeometry",
    "DetectionChain",
    "Medium",
    "NoiseModel",
    "ParameterError",
    "PulseEnvelope",
    "Scenario",
    "Timeline",
    "WaveVector",
    "load_scenario",
    "paper_defaults",
    "validate_scenario",
]
