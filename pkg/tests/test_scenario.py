import json
import math

import pytest

from rose_echo.model import ParameterError
from rose_echo.scenario import Scenario, load_scenario, paper_defaults
from rose_echo.noise import observed_se_calibration


def test_default_preset():
    sc = paper_defaults()
    assert sc.violations() == []
    assert [p.t_center for p in sorted(sc.pulses, key=lambda p: p.t_center)] == [0.0, 10e-6, 30e-6]
    assert sc.signal.params["photon_number"] == 14
    assert sc.noise.se_calibration == observed_se_calibration(1.4, 2 * math.pi * 480e3)
    assert sc.noise.n_e_after_two_chs == pytest.approx(1 / 3)


def test_round_trip_is_exact():
    sc = paper_defaults()
    text = json.dumps(sc.to_dict())
    assert Scenario.from_dict(json.loads(text)) == sc
    assert load_scenario("paper-defaults") == sc


def test_partial_config_fills_defaults():
    sc = Scenario.from_dict({"timeline": {"t2": "8 us", "t3": "25 us"}})
    chs = sc.rephasing
    assert [p.t_center for p in chs] == [8e-6, 25e-6]
    assert sc.medium == paper_defaults().medium


def test_unit_strings_are_converted():
    sc = Scenario.from_dict({
        "medium": {"T2": "40 us", "length": "5 mm"},
        "pulses": [
            {"kind": "gaussian_signal", "tau": "1 us", "photon_number": "10 photons"},
            {"kind": "chs", "beta": "100 kHz"},
            {"kind": "chs", "beta": "100 kHz"},
        ],
    })
    assert sc.medium.T2 == 40e-6
    assert sc.medium.length_L == 0.005
    assert sc.signal.params == {"tau": 1e-6, "photon_number": 10.0, "reference_area": 0.01}
    assert sc.rephasing[1].params["beta"] == pytest.approx(2 * math.pi * 1e5)
    assert sc.rephasing[1].t_center == 30e-6


@pytest.mark.parametrize(
    "raw, where",
    [
        ({"medium": {"T2": 55e-6}}, "medium.T2"),
        ({"medium": {"T2": "55 kHz"}}, "medium.T2"),
        ({"medium": {"t2": "55 us"}}, "medium"),
        ({"bogus": {}}, "root"),
        ({"pulses": [{"kind": "square"}]}, "pulses[0].kind"),
        ({"geometry": {"k1": [0, 1]}}, "geometry.k1"),
    ],
)
def test_config_errors_name_the_field(raw, where):
    with pytest.raises(ParameterError) as exc:
        Scenario.from_dict(raw)
    assert where in str(exc.value)


def test_inconsistent_timeline_is_reported():
    sc = Scenario.from_dict({"timeline": {"t2": "30 us", "t3": "20 us"}})
    assert sc.violations()[0].startswith("timeline")


def test_metrics_record_is_accepted(tmp_path):
    sc = paper_defaults()
    path = tmp_path / "metrics.json"
    path.write_text(json.dumps({"seed": 3, "scenario": sc.to_dict()}))
    assert load_scenario(path) == sc


def test_unreadable_config(tmp_path):
    with pytest.raises(ParameterError, match="cannot read"):
        load_scenario(tmp_path / "missing.json")
