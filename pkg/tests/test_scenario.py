import json
from pathlib import Path

import pytest

from authsim.adversary import AdversaryKind
from authsim.errors import ParseError, SchemaError
from authsim.scenario import SEED_ENV, Scenario, load_scenario, parse_scenario, resolve_seed, scenario_schema

SCENARIOS = Path(__file__).resolve().parents[1] / "scenarios"


def _write(path: Path, obj) -> Path:
    path.write_text(json.dumps(obj))
    return path


def test_minimal_file_gets_documented_defaults(tmp_path: Path):
    s = load_scenario(_write(tmp_path / "s.json", {"schema_version": 1}))
    assert s.name == "default"
    assert s.n_sessions == 100
    assert s.protocol.n_rounds == 256
    assert s.protocol.guard == pytest.approx(0.3)
    assert s.trust.init_known == pytest.approx(0.9)
    assert s.channel.rho == pytest.approx(0.99)
    assert [a.kind for a in s.adversaries] == list(AdversaryKind)
    assert s.attribute_sets == (("rssi",), ("rssi", "cfo", "attack"))
    assert s.fleet_sizes == (10, 100, 1000)


@pytest.mark.parametrize(
    "obj, path",
    [
        ({"foo": 1}, "foo"),
        ({"channel": {"bogus": 1}}, "channel.bogus"),
        ({"protocol": {"n_rounds": -4}}, "protocol.n_rounds"),
        ({"n_sessions": "many"}, "n_sessions"),
        ({"schema_version": 2}, "schema_version"),
        ({"attribute_sets": [["rssi", "colour"]]}, "attribute_sets"),
        ({"adversaries": [{"kind": "Wizard"}]}, "adversaries.0.kind"),
    ],
)
def test_schema_errors_name_the_offending_path(obj, path):
    with pytest.raises(SchemaError) as exc:
        parse_scenario(obj)
    assert exc.value.path == path
    assert path in str(exc.value)


def test_scenario_must_be_an_object():
    with pytest.raises(SchemaError):
        parse_scenario([1, 2, 3])


def test_missing_and_malformed_files(tmp_path: Path):
    with pytest.raises(FileNotFoundError):
        load_scenario(tmp_path / "nope.json")
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    with pytest.raises(ParseError):
        load_scenario(bad)


def test_seed_resolution_order(monkeypatch: pytest.MonkeyPatch):
    monkeypatch.delenv(SEED_ENV, raising=False)
    assert resolve_seed(Scenario()) == 0

    monkeypatch.setenv(SEED_ENV, "0x2a")
    assert resolve_seed(Scenario()) == 42
    assert resolve_seed(Scenario(master_seed=7)) == 7
    assert resolve_seed(Scenario(master_seed=7), 9) == 9

    monkeypatch.setenv(SEED_ENV, "soon")
    with pytest.raises(ParseError):
        resolve_seed(Scenario())


def test_shipped_scenarios_validate():
    files = sorted(SCENARIOS.glob("*.json"))
    assert files
    for path in files:
        assert isinstance(load_scenario(path), Scenario)


def test_switch_schedule_from_json():
    s = load_scenario(SCENARIOS / "switching_impersonator.json")
    (adv,) = s.adversaries
    assert adv.switch_schedule == ((0, False), (10, True), (30, False))


def test_json_schema_lists_sub_records():
    schema = scenario_schema()
    for key in ("channel", "protocol", "trust", "adversaries", "cost_model", "puf"):
        assert key in schema["properties"]
