"""Parsing of unit-suffixed quantities used in scenario files.

Frequencies given in Hz/kHz/MHz are cyclic and are converted to angular
frequency (rad/s).  A bare number is rejected for any dimensioned field so a
forgotten unit can never silently become seconds or rad/s.
"""

from __future__ import annotations

import math
import re

_QUANTITY = re.compile(r"^\s*([-+]?(?:inf|(?:\d+\.?\d*|\.\d+)(?:[eE][-+]?\d+)?))\s*(\S*)\s*$")

_TIME = {"s": 1.0, "ms": 1e-3, "us": 1e-6, "µs": 1e-6, "μs": 1e-6, "ns": 1e-9}
_LENGTH = {"m": 1.0, "cm": 1e-2, "mm": 1e-3, "um": 1e-6, "µm": 1e-6, "nm": 1e-9}
_ANGULAR = {
    "rad/s": 1.0,
    "Hz": 2 * math.pi,
    "kHz": 2 * math.pi * 1e3,
    "MHz": 2 * math.pi * 1e6,
    "GHz": 2 * math.pi * 1e9,
}
_RATE = {"Hz": 1.0, "kHz": 1e3, "1/s": 1.0}
_ANGLE = {"rad": 1.0, "mrad": 1e-3, "urad": 1e-6, "deg": math.pi / 180}

DIMENSIONS = {
    "time": _TIME,
    "length": _LENGTH,
    "angular_frequency": _ANGULAR,
    "rate": _RATE,
    "angle": _ANGLE,
}

# Canonical SI suffix written back out when a scenario is serialized.
CANONICAL = {
    "time": "s",
    "length": "m",
    "angular_frequency": "rad/s",
    "rate": "Hz",
    "angle": "rad",
}


class UnitError(ValueError):
    """A quantity string is malformed or carries the wrong unit."""


def parse_quantity(value, dimension: str) -> float:
    """Convert ``"10 us"``-style strings to SI floats (angular units for frequencies).

    >>> parse_quantity("800 kHz", "angular_frequency") / (2 * math.pi)
    800000.0
    """
    table = DIMENSIONS[dimension]
    if isinstance(value, bool) or not isinstance(value, str):
        raise UnitError(
            f"expected a {dimension} string with an explicit unit "
            f"(one of {sorted(table)}), got {value!r}"
        )
    match = _QUANTITY.match(value)
    if match is None:
        raise UnitError(f"cannot parse quantity {value!r}")
    number, unit = match.groups()
    if unit not in table:
        raise UnitError(
            f"unit {unit!r} in {value!r} is not a {dimension} unit; "
            f"use one of {sorted(table)}"
        )
    scale = table[unit]
    if scale < 1 and float(round(1 / scale)) == round(1 / scale, 6):
        # divide by the exact power of ten: "10 us" -> 1e-05 correctly rounded
        return float(number) / round(1 / scale)
    return float(number) * scale


def format_quantity(value: float, dimension: str) -> str:
    """Exact (repr-based) SI string so a resolved scenario round-trips bit-exactly."""
    if math.isinf(value):
        return f"inf {CANONICAL[dimension]}"
    return f"{value!r} {CANONICAL[dimension]}"
