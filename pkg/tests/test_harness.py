from collections import defaultdict

from authsim.adversary import AdversaryConfig, AdversaryKind
from authsim.harness import ADVERSARIAL, LEGITIMATE, compare_baseline, run_scenario, selftest
from authsim.protocol import Scheme
from authsim.scenario import Scenario
from authsim.utils import canonical

SUBSET = "cfo"
SUPERSET = "rssi+cfo+attack"


def _small(name: str = "small", **kw) -> Scenario:
    base = dict(
        name=name,
        master_seed=3,
        n_sessions=4,
        n_slots=10,
        attribute_sets=(("cfo",), ("rssi", "cfo", "attack")),
        fleet_sizes=(2,),
    )
    base.update(kw)
    return Scenario(**base)


def test_runs_are_reproducible():
    a = run_scenario(_small())
    b = run_scenario(_small())
    assert canonical.dumps(a.metrics) == canonical.dumps(b.metrics)
    assert a.trajectories == b.trajectories
    assert a.outcomes == b.outcomes


def test_scenarios_do_not_leak_into_each_other():
    first = run_scenario(_small("a"))
    run_scenario(_small("b", master_seed=99))
    again = run_scenario(_small("a"))
    assert canonical.dumps(first.metrics) == canonical.dumps(again.metrics)


def test_cli_seed_overrides_file_seed():
    bundle = run_scenario(_small(), seed=11)
    assert bundle.master_seed == 11
    assert bundle.metrics["master_seed"] == 11


def test_no_adversary_is_accepted():
    bundle = run_scenario(_small())
    m = bundle.metrics
    assert m["far"] == 0.0
    assert m["schema_version"] == "1"
    assert m["outcome_counts"][ADVERSARIAL]["Authenticated"] == 0
    assert m["outcome_counts"][LEGITIMATE]["Authenticated"] >= 3
    assert m["scheme_properties"]["characteristic"] == "proposed"
    assert len(bundle.outcomes) == 8


def test_more_attributes_never_raise_trust():
    bundle = run_scenario(_small())
    series = defaultdict(dict)
    for row in bundle.trajectories:
        series[row.device_id].setdefault(row.attribute_set, []).append(row.value)
    assert series
    for per_set in series.values():
        for low, high in zip(per_set[SUPERSET], per_set[SUBSET]):
            assert low <= high


def test_impersonator_ends_terminated():
    bundle = run_scenario(_small())
    rows = [
        r for r in bundle.trajectories if r.device_id.endswith(":IpSpoofImpersonator") and r.attribute_set == SUPERSET
    ]
    assert rows
    assert rows[-1].level == 0
    (record,) = [o for o in bundle.outcomes if o["adversary"] == "IpSpoofImpersonator"]
    assert record["outcome"]["status"] == "Terminated"


def test_switched_off_adversary_counts_as_legitimate():
    idle = AdversaryConfig(kind=AdversaryKind.REPLAYER, switch_schedule=((0, False),))
    bundle = run_scenario(_small(adversaries=(idle,), n_sessions=2), include_costs=False)
    assert {o["role"] for o in bundle.outcomes} == {LEGITIMATE}
    assert bundle.metrics["far"] is None
    assert bundle.costs == []


def test_selftest_passes():
    checks = selftest()
    assert checks
    assert all(checks.values()), checks


def test_compare_baseline_rows():
    rows = compare_baseline(_small(fleet_sizes=(2, 4)))
    assert [(r.scheme, r.n_devices) for r in rows] == [
        (Scheme.PROPOSED, 2),
        (Scheme.PUF_BASELINE, 2),
        (Scheme.PROPOSED, 4),
        (Scheme.PUF_BASELINE, 4),
    ]
    puf = [r.total_cost for r in rows if r.scheme is Scheme.PUF_BASELINE]
    assert puf[0] < puf[1]
