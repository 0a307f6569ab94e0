import json

import numpy as np
import pytest
from pydantic import ValidationError

from config import SAMPLING_CONFIG, TOLERANCES
from core.errors import ConfigError
from harness.catalog import get_algebroid
from harness.scenario import SamplingSpec, Scenario, probe_point, sample_points


def write(tmp_path, payload, name="scenario.json"):
    path = tmp_path / name
    path.write_text(payload if isinstance(payload, str) else json.dumps(payload))
    return path


def test_defaults(tmp_path):
    scenario = Scenario.load(write(tmp_path, {"algebroid": "trivial"}))
    assert scenario.command == "report"
    assert scenario.sampling.points == SAMPLING_CONFIG["points"]
    assert scenario.tolerances.as_dict() == TOLERANCES


def test_induction_layout(tmp_path):
    scenario = Scenario.load(write(tmp_path, {
        "algebroid": "immersion",
        "lagrangian": "eta1*etab1 + eta2*etab2",
        "case": 2,
        "direction": "TM_to_E",
        "points": 5,
    }))
    assert scenario.command == "induce"
    assert scenario.case == 2
    assert scenario.sampling.points == 5


def test_points_block(tmp_path):
    scenario = Scenario.load(write(tmp_path, {"algebroid": "scaled", "command": "validate",
                                              "points": {"points": 3, "seed": 11}}))
    assert scenario.command == "validate"
    assert (scenario.sampling.points, scenario.sampling.seed) == (3, 11)


@pytest.mark.parametrize("payload, fragment", [
    ("{\"algebroid\": ", "Malformed JSON"),
    ("[1, 2]", "JSON object"),
    ({"command": "validate"}, "algebroid"),
    ({"algebroid": "trivial", "command": "explode"}, "command"),
    ({"algebroid": "trivial", "case": 4}, "case"),
    ({"algebroid": "trivial", "tolerances": {"metric": -1}}, "tolerances.metric"),
    ({"algebroid": "trivial", "points": 0}, "sampling.points"),
])
def test_invalid_scenarios(tmp_path, payload, fragment):
    with pytest.raises(ConfigError, match=fragment):
        Scenario.load(write(tmp_path, payload))


def test_missing_scenario_file(tmp_path):
    with pytest.raises(ConfigError, match="Cannot read"):
        Scenario.load(tmp_path / "nothing.json")


def test_radii_must_be_ordered():
    with pytest.raises(ValidationError):
        SamplingSpec(radius_min=2.0, radius_max=1.0)


def test_probe_point_defaults_and_overrides():
    a, _ = get_algebroid("submersion")
    p = probe_point(a)
    assert p.z == (1 + 0j,)
    assert p.u == (2 + 0j, 2 + 0j)
    p = probe_point(a, "z1=0.5, u2=2+1i")
    assert p.z == (0.5 + 0j,)
    assert p.u == (2 + 0j, 2 + 1j)


@pytest.mark.parametrize("text", ["u3=1", "x1=1", "z1=one", "z0=1"])
def test_bad_probe_points(text):
    a, _ = get_algebroid("submersion")
    with pytest.raises(ConfigError):
        probe_point(a, text)


def test_sampling_is_seeded():
    a, _ = get_algebroid("submersion")
    first = sample_points(a, SamplingSpec(points=5, seed=3))
    second = sample_points(a, SamplingSpec(points=5, seed=3))
    other = sample_points(a, SamplingSpec(points=5, seed=4))
    assert first == second
    assert first != other
    assert all(p.n == 1 and p.m == 2 for p in first)


def test_samples_lie_in_the_annulus():
    a, _ = get_algebroid("tangent")
    spec = SamplingSpec(points=20, seed=1, radius_min=0.5, radius_max=1.5)
    for p in sample_points(a, spec):
        radii = np.abs(np.array(p.z + p.u))
        assert np.all(radii >= 0.5 - 1e-12)
        assert np.all(radii <= 1.5 + 1e-12)


def test_singular_loci_are_avoided():
    a, _ = get_algebroid("scaled")
    spec = SamplingSpec(points=20, seed=2, radius_min=0.05, radius_max=0.5, exclusion_radius=0.2)
    assert all(abs(p.z[0]) >= 0.2 for p in sample_points(a, spec))
    shifted = sample_points(a, spec, extra_loci=[(1, 0.4 + 0j)])
    assert all(abs(p.z[0] - 0.4) >= 0.2 for p in shifted)


def test_sampling_gives_up_inside_an_exclusion_ball():
    a, _ = get_algebroid("scaled")
    spec = SamplingSpec(points=1, radius_min=0.3, radius_max=0.3, exclusion_radius=0.5, max_draws_per_point=5)
    with pytest.raises(ConfigError, match="No admissible sample point"):
        sample_points(a, spec)
