import json

import pytest

from core.errors import ConfigError
from harness.catalog import catalog, catalog_names, default_lagrangian, get_algebroid, lagrangian_domain, load_definition


def test_catalog_entries():
    names = catalog_names()
    assert names == [a.name for a in catalog()]
    assert {"trivial", "tangent", "scaled", "immersion", "submersion", "twochart", "heisenberg-like"} <= set(names)


def test_every_entry_has_a_default_lagrangian():
    for a in catalog():
        L = default_lagrangian(a)
        assert L is not None
        assert L.domain == lagrangian_domain(a.name)


def test_immersion_lagrangian_lives_on_tangent_bundle():
    a, text = get_algebroid("immersion")
    assert "eta1" in text
    assert default_lagrangian(a).domain == "onTM"
    assert default_lagrangian(a, "u1*ub1", "onE").domain == "onE"


def test_unknown_entry():
    with pytest.raises(ConfigError, match="known entries"):
        get_algebroid("moebius")


def test_definition_file(tmp_path):
    path = tmp_path / "line.json"
    path.write_text(json.dumps({
        "name": "line",
        "n": 1,
        "m": 1,
        "rho": [["z1^2"]],
        "singular_loci": [{"k": 1, "value": 0}],
        "lagrangian": "u1*ub1",
    }))
    a, text = get_algebroid(str(path))
    assert (a.name, a.n, a.m) == ("line", 1, 1)
    assert text == "u1*ub1"
    assert a.singular_loci == ((1, 0j),)


def test_definition_file_with_chart(tmp_path):
    path = tmp_path / "inversion.json"
    path.write_text(json.dumps({
        "name": "inverted",
        "n": 1,
        "m": 1,
        "rho": [["1"]],
        "charts": [{"zmap": ["1/z1"], "M": [["z1"]], "W": [["1/z1"]], "inverse_zmap": ["1/z1"],
                    "singular_loci": [{"k": 1, "value": [0, 0]}]}],
    }))
    a, text = load_definition(path)
    assert text is None
    assert len(a.charts) == 1
    assert a.charts[0].inverse_zmap is not None


@pytest.mark.parametrize("content", [
    "{not json",
    json.dumps({"name": "x", "n": 1, "m": 1}),
    json.dumps({"name": "x", "n": 0, "m": 1, "rho": [["1"]]}),
    json.dumps({"name": "x", "n": 1, "m": 2, "rho": [["1"]]}),
    json.dumps({"name": "x", "n": 1, "m": 1, "rho": [["zb1"]]}),
    json.dumps({"name": "x", "n": 1, "m": 1, "rho": [["1"]], "singular_loci": [{"k": 1, "value": [1, 2, 3]}]}),
])
def test_malformed_definition_files(tmp_path, content):
    path = tmp_path / "bad.json"
    path.write_text(content)
    with pytest.raises(ConfigError):
        get_algebroid(str(path))


def test_missing_definition_file(tmp_path):
    with pytest.raises(ConfigError, match="Cannot read"):
        get_algebroid(str(tmp_path / "absent.json"))
