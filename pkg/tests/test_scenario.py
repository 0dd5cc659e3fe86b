import pytest

from hybridmesh import scenario
from hybridmesh.scenario import ScenarioError

MINIMAL = """
[meta]
name = "pair"

[[nodes]]
id = 1
role = "hub"

[[nodes]]
id = 2
x = 100.0
"""


@pytest.mark.parametrize("name", scenario.bundled_names())
def test_bundled_roundtrip(name):
    sc = scenario.bundled(name)
    again = scenario.loads(scenario.dumps(sc))
    assert again == sc and again.digest() == sc.digest()


def test_expected_bundles_present():
    assert {"fig-routing", "inlab-9", "energy-4", "farm-5hop", "campus-13", "mesh-vs-aloha"} <= set(
        scenario.bundled_names())


def test_defaults_fill_in():
    sc = scenario.loads(MINIMAL)
    assert sc.hub == 1 and sc.radio.sf == 7 and sc.traffic.slot_ms == 125
    assert sc.node(2).role == "mesh" and sc.node(2).x == 100.0


def test_unknown_key_reports_line():
    text = MINIMAL.replace('name = "pair"', 'name = "pair"\ncolour = "red"')
    with pytest.raises(ScenarioError) as exc:
        scenario.loads(text)
    assert exc.value.line == 4 and "colour" in str(exc.value)


def test_unknown_section():
    with pytest.raises(ScenarioError, match="unknown section"):
        scenario.loads(MINIMAL + "\n[weather]\nrain = 1\n")


def test_toml_syntax_error_is_scenario_error():
    with pytest.raises(ScenarioError, match="line"):
        scenario.loads(MINIMAL + "\n[radio\n")


@pytest.mark.parametrize("patch,msg", [
    (("role = \"hub\"", "role = \"mesh\""), "exactly one hub"),
    (("id = 2", "id = 1"), "unique"),
    (("x = 100.0", "x = 100.0\nrole = \"gremlin\""), "unknown role"),
    (("x = 100.0", "x = 100.0\nrole = \"srsn-member\""), "cluster"),
    (("name = \"pair\"", "name = \"pair\"\n[traffic]\nhub_uplink = true"), "gateway"),
    (("name = \"pair\"", "name = \"pair\"\n[channel]\nlink_loss = 1.5"), "probabilities"),
    (("name = \"pair\"", "name = \"pair\"\n[radio]\nsf = 13"), "spreading factor"),
    (("name = \"pair\"", "name = \"pair\"\n[channel]\nwhitelist = [[1, 9]]"), "whitelist"),
])
def test_validation(patch, msg):
    with pytest.raises(ScenarioError, match=msg):
        scenario.loads(MINIMAL.replace(*patch))


def test_fault_injection():
    sc = scenario.loads(MINIMAL).with_fault(30, "kill", 2).with_fault(10, "revive", 2)
    assert [(f.time_s, f.action) for f in sc.faults] == [(10.0, "revive"), (30.0, "kill")]
    with pytest.raises(ScenarioError):
        sc.with_fault(5, "kill", 99)
    with pytest.raises(ScenarioError):
        sc.with_fault(5, "explode", 2)


def test_save_and_load(tmp_path):
    sc = scenario.bundled("energy-4")
    scenario.save(sc, tmp_path / "e.toml")
    assert scenario.load(tmp_path / "e.toml") == sc


def test_reference_parses():
    text = scenario.reference()
    assert text.startswith("#") and "[traffic]" in text
    assert scenario.loads(text).hub == 1


def test_hub_defaults_to_node_nearest_gateway():
    sc = scenario.loads('[gateway]\nx = 1000.0\n[[nodes]]\nid = 1\n[[nodes]]\nid = 2\nx = 900.0\n'
                        '[[nodes]]\nid = 3\nx = 1100.0\n')
    assert sc.hub == 2
    with pytest.raises(ScenarioError, match="exactly one hub"):
        scenario.loads('[[nodes]]\nid = 1\n[[nodes]]\nid = 2\n')
