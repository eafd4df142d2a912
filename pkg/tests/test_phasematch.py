import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.spatial.transform import Rotation

from rose_echo.model import BeamGeometry, ParameterError, WaveVector
from rose_echo.phasematch import (
    classify,
    echo_wavevector_2pe,
    echo_wavevector_rose,
    protocol_match,
)

K = 2 * math.pi / 793e-9
L = 8e-3


def kv(direction):
    return WaveVector(tuple(direction), K)


def test_counterpropagating_2pe_is_silenced_by_2k():
    k1 = kv((0, 0, 1))
    k_e = echo_wavevector_2pe(k1, kv((0, 0, -1)))
    assert np.array_equal(k_e, -3 * k1.vector)
    assert np.linalg.norm(k_e) - K == pytest.approx(2 * K, rel=1e-15)
    assert classify(k_e, K, L).silenced


def test_rose_with_equal_rephasing_beams_is_matched():
    k1, k2 = kv((0, 0, 1)), kv((0.3, 0, -1))
    report = classify(echo_wavevector_rose(k1, k2, k2), K, L)
    assert report.mismatch_phase == 0.0
    assert report.emitted


def test_default_geometry():
    k1, k2, k3 = BeamGeometry().wavevectors()
    reports = protocol_match(k1, k2, k3, L)
    assert reports["2pe"].silenced
    assert reports["rose"].emitted
    assert "rose" not in protocol_match(k1, k2, None, L)


def test_thresholds():
    k_hat = np.array([0.0, 0.0, 1.0])
    at = lambda phase: classify(k_hat * (K + phase / L), K, L).classification
    assert at(0.9 * math.pi / 10) == "emitted"
    assert at(math.pi / 10) == "marginal"
    assert at(0.5 * math.pi) == "marginal"
    assert at(math.pi * (1 + 1e-9)) == "silenced"
    assert at(-math.pi * (1 + 1e-9)) == "silenced"
    assert classify(k_hat * (K + 1.0), K, math.pi).silenced  # boundary itself


def test_mismatched_magnitudes_rejected():
    with pytest.raises(ParameterError, match="k2"):
        echo_wavevector_2pe(kv((0, 0, 1)), WaveVector((0, 0, -1), 1.001 * K))


def test_bad_length_rejected():
    with pytest.raises(ParameterError, match="L"):
        classify(np.zeros(3), K, 0.0)


unit = st.tuples(*[st.floats(-1, 1, allow_nan=False)] * 3).filter(lambda v: np.linalg.norm(v) > 0.1)


@settings(max_examples=100, deadline=None)
@given(unit, unit, unit, st.integers(0, 2**32 - 1))
def test_rotation_invariance(d1, d2, d3, seed):
    rot = Rotation.random(random_state=seed)
    ks = [kv(d) for d in (d1, d2, d3)]
    rk = [kv(rot.apply(np.asarray(d) / np.linalg.norm(d))) for d in (d1, d2, d3)]
    for fn, args, rargs in (
        (echo_wavevector_2pe, ks[:2], rk[:2]),
        (echo_wavevector_rose, ks, rk),
    ):
        a = classify(fn(*args), K, L)
        b = classify(fn(*rargs), K, L)
        assert abs(a.mismatch_phase - b.mismatch_phase) <= 1e-9 * max(1.0, abs(a.mismatch_phase))
        assert np.allclose(rot.apply(fn(*args)), fn(*rargs), rtol=0, atol=1e-9 * K)
