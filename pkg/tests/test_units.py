import math

import pytest
from hypothesis import given, strategies as st

from rose_echo.units import UnitError, format_quantity, parse_quantity


@pytest.mark.parametrize(
    "text, dim, expected",
    [
        ("10 us", "time", 1e-05),
        ("10 µs", "time", 1e-05),
        ("256 ns", "time", 2.56e-07),
        ("793 nm", "length", 7.93e-07),
        ("8 mm", "length", 0.008),
        ("80 kHz", "angular_frequency", 2 * math.pi * 80e3),
        ("1.5e6 rad/s", "angular_frequency", 1.5e6),
        ("50 Hz", "rate", 50.0),
        ("10 mrad", "angle", 0.01),
        ("inf s", "time", math.inf),
    ],
)
def test_parse(text, dim, expected):
    assert parse_quantity(text, dim) == pytest.approx(expected, rel=1e-15)


def test_sub_units_are_correctly_rounded():
    assert parse_quantity("10 us", "time") == 1e-05
    assert parse_quantity("55 us", "time") == 55e-6


@pytest.mark.parametrize("bad", [10, 1e-6, "10", "10 kHz", "ten us", True])
def test_rejects_missing_or_wrong_units(bad):
    with pytest.raises(UnitError):
        parse_quantity(bad, "time")


@given(st.floats(min_value=1e-12, max_value=1e12, allow_nan=False))
def test_format_parse_round_trip(x):
    for dim in ("time", "length", "angular_frequency", "rate", "angle"):
        assert parse_quantity(format_quantity(x, dim), dim) == x
