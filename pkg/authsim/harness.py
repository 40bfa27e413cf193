"""
Batch execution of scenarios and metric aggregation.

``run_scenario`` enrolls one device per session index, runs its legitimate
session (plus ongoing access), then the adversarial session for the same
device with ``adversaries[i % len(adversaries)]`` interposed. Everything is
derived from ``(master_seed, scenario name)``, so a scenario's outputs do not
depend on what else runs in the same process.
"""

from __future__ import annotations

import hashlib
import logging
from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional, Tuple

import numpy as np

from .adversary import Adversary, SessionRecord, far_frr, make_adversary
from .contracts import METRICS_CONTRACT, METRICS_PURPOSE, as_policy_dict
from .errors import EmptyPopulation
from .messages import Authenticated, SessionTranscript
from .protocol import FleetCost, ProtocolEngine, Scheme, fleet_cost, scheme_properties
from .rng import RngStream
from .scenario import Scenario, resolve_seed
from .trust import TrajectoryPoint

logger = logging.getLogger(__name__)

LEGITIMATE = "legitimate"
ADVERSARIAL = "adversarial"


@dataclass(frozen=True)
class TrajectoryRow:
    device_id: str
    attribute_set: str
    step: int
    value: float
    level: int

    def row(self) -> Dict[str, Any]:
        return {
            "device_id": self.device_id,
            "attribute_set": self.attribute_set,
            "step": self.step,
            "value": self.value,
            "level": self.level,
        }


@dataclass
class MetricsBundle:
    scenario: str
    master_seed: int
    metrics: Dict[str, Any]
    trajectories: List[TrajectoryRow]
    outcomes: List[Dict[str, Any]]
    costs: List[FleetCost]
    transcripts: List[SessionTranscript] = field(default_factory=list, repr=False)


def _finish(
    engine: ProtocolEngine,
    transcript: SessionTranscript,
    scenario: Scenario,
    rng: RngStream,
) -> Tuple[SessionTranscript, Optional[Dict[str, List[TrajectoryPoint]]]]:
    if not transcript.authenticated or scenario.protocol.mode != "proposed":
        return transcript, None
    result = engine.ongoing_access(
        transcript, scenario.n_slots, rng.child("ongoing"), attribute_sets=scenario.attribute_sets
    )
    return result.transcript, result.trajectories


def _outcome_record(
    t: SessionTranscript, role: str, adversary: Optional[Adversary], ongoing: bool
) -> Dict[str, Any]:
    return {
        "session_id": t.session_id,
        "device_id": t.device_id,
        "role": role,
        "adversary": adversary.kind.value if adversary is not None else None,
        "scheme": t.scheme,
        "outcome": t.outcome.to_payload(),
        "attempts": t.diagnostics.get("attempts"),
        "retained_bits": t.diagnostics.get("retained"),
        "bit_agreement": t.diagnostics.get("bit_agreement"),
        "seed_match": bool(t.diagnostics.get("seed_match")),
        "ongoing_access": ongoing,
        "n_messages": len(t.messages),
        "total_cost": t.total_cost,
        "wall_time_s": t.wall_time_s,
    }


def _mean_trajectories(
    collected: Dict[str, Dict[str, List[List[TrajectoryPoint]]]]
) -> Dict[str, Dict[str, List[float]]]:
    out: Dict[str, Dict[str, List[float]]] = {}
    for role, per_set in collected.items():
        out[role] = {}
        for label, runs in per_set.items():
            values = np.array([[p.value for p in run] for run in runs], dtype=np.float64)
            out[role][label] = [float(v) for v in values.mean(axis=0)]
    return out


def compare_baseline(scenario: Scenario, seed: Optional[int] = None) -> List[FleetCost]:
    """Fleet cost rows: every fleet size x {Proposed, PufBaseline}."""
    master = resolve_seed(scenario, seed)
    root = RngStream(master, f"scenario/{scenario.name}/baseline")
    rows: List[FleetCost] = []
    for n in scenario.fleet_sizes:
        for scheme in (Scheme.PROPOSED, Scheme.PUF_BASELINE):
            rows.append(
                fleet_cost(
                    n,
                    scheme,
                    cfg=scenario.channel,
                    params=scenario.protocol,
                    cost_model=scenario.cost_model,
                    puf_params=scenario.puf,
                    rng=root,
                    record_wall_time=scenario.record_wall_time,
                )
            )
    return rows


def run_scenario(
    scenario: Scenario,
    seed: Optional[int] = None,
    *,
    include_costs: bool = True,
    keep_transcripts: bool = False,
) -> MetricsBundle:
    master = resolve_seed(scenario, seed)
    root = RngStream(master, f"scenario/{scenario.name}")
    engine = ProtocolEngine(
        scenario.protocol, scenario.trust, scenario.cost_model, record_wall_time=scenario.record_wall_time
    )

    records: List[SessionRecord] = []
    outcomes: List[Dict[str, Any]] = []
    rows: List[TrajectoryRow] = []
    collected: Dict[str, Dict[str, List[List[TrajectoryPoint]]]] = {LEGITIMATE: {}, ADVERSARIAL: {}}
    transcripts: List[SessionTranscript] = []
    first_legit: Optional[SessionTranscript] = None
    agreements: List[float] = []
    seed_matches = 0
    n_legit_sessions = 0

    def collect(device_label: str, role: str, trajs: Dict[str, List[TrajectoryPoint]]) -> None:
        for label, points in trajs.items():
            collected[role].setdefault(label, []).append(points)
            rows.extend(TrajectoryRow(device_label, label, p.step, p.value, p.level) for p in points)

    for i in range(scenario.n_sessions):
        device_id = f"dev-{i:05d}"
        dev_rng = root.child(device_id)
        engine.enroll(device_id, scenario.channel, dev_rng)

        first = engine.run_session(device_id, scenario.channel, rng=dev_rng.child("legit"))
        n_legit_sessions += 1
        if first.diagnostics.get("seed_match"):
            seed_matches += 1
        if first.diagnostics.get("bit_agreement") is not None:
            agreements.append(float(first.diagnostics["bit_agreement"]))
        final, trajs = _finish(engine, first, scenario, dev_rng.child("legit"))
        if first_legit is None:
            first_legit = final
        records.append(SessionRecord(device_id, LEGITIMATE, final.outcome))
        outcomes.append(_outcome_record(final, LEGITIMATE, None, trajs is not None))
        if trajs is not None:
            collect(device_id, LEGITIMATE, trajs)
        if keep_transcripts:
            transcripts.append(final)

        if not scenario.adversaries:
            continue
        adv_cfg = scenario.adversaries[i % len(scenario.adversaries)]
        adversary = make_adversary(adv_cfg, dev_rng.child(f"adversary/{adv_cfg.kind.value}"))
        adversary.observe(final.messages)
        first_a = engine.run_session(device_id, scenario.channel, rng=dev_rng.child("adversarial"), adversary=adversary)
        final_a, trajs_a = _finish(engine, first_a, scenario, dev_rng.child("adversarial"))
        role = ADVERSARIAL if adversary.ever_active(scenario.n_slots) else LEGITIMATE
        records.append(SessionRecord(device_id, role, final_a.outcome, adversary.kind.value))
        outcomes.append(_outcome_record(final_a, role, adversary, trajs_a is not None))
        if trajs_a is not None:
            collect(f"{device_id}:{adversary.kind.value}", role, trajs_a)
        if keep_transcripts:
            transcripts.append(final_a)

        if (i + 1) % 100 == 0:
            logger.info("%s: %d/%d sessions", scenario.name, i + 1, scenario.n_sessions)

    try:
        far, frr = far_frr(records)
    except EmptyPopulation as exc:
        logger.warning("FAR/FRR undefined: %s", exc)
        legit = [r for r in records if r.label == LEGITIMATE]
        far = None
        frr = (
            sum(1 for r in legit if not isinstance(r.outcome, Authenticated)) / len(legit) if legit else None
        )

    counts: Dict[str, Dict[str, int]] = {}
    for rec in outcomes:
        status = rec["outcome"]["status"]
        bucket = counts.setdefault(rec["role"], {"Authenticated": 0, "Rejected": 0, "Terminated": 0})
        bucket[status] += 1

    costs = compare_baseline(scenario, master) if include_costs else []
    properties = scheme_properties(first_legit) if first_legit is not None else None

    metrics: Dict[str, Any] = {
        "schema_version": "1",
        "purpose": METRICS_PURPOSE,
        "contract": METRICS_CONTRACT,
        "policy": as_policy_dict(scenario.trust, scenario.protocol),
        "scenario": scenario.name,
        "master_seed": master,
        "n_sessions": scenario.n_sessions,
        "n_slots": scenario.n_slots,
        "attribute_sets": ["+".join(s) for s in scenario.attribute_sets],
        "bit_agreement": {
            "n": len(agreements),
            "mean": float(np.mean(agreements)) if agreements else None,
            "min": float(np.min(agreements)) if agreements else None,
        },
        "seed_match_rate": seed_matches / n_legit_sessions if n_legit_sessions else None,
        "far": far,
        "frr": frr,
        "outcome_counts": counts,
        "mean_trajectories": _mean_trajectories(collected),
        "costs": [c.row() for c in costs],
        "scheme_properties": properties,
    }
    logger.info("%s: FAR=%s FRR=%s seed_match_rate=%s", scenario.name, far, frr, metrics["seed_match_rate"])
    return MetricsBundle(
        scenario=scenario.name,
        master_seed=master,
        metrics=metrics,
        trajectories=rows,
        outcomes=outcomes,
        costs=costs,
        transcripts=transcripts,
    )


# -- selftest --------------------------------------------------------------

SHA256_EMPTY = "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855"


def selftest() -> Dict[str, bool]:
    """Hash vector, PRBS15 period/balance and the two-point SVM closed form."""
    from .prbs import LfsrState, prbs_bits, prbs_next
    from .svm import Kernel, decision, train_binary

    checks: Dict[str, bool] = {}
    checks["sha256_empty_vector"] = hashlib.sha256(b"").hexdigest() == SHA256_EMPTY

    start = LfsrState(1, 15)
    state, steps = start, 0
    while True:
        _, state = prbs_next(state)
        steps += 1
        if state == start or steps > 2**15:
            break
    checks["prbs15_period"] = steps == 2**15 - 1
    bits, _ = prbs_bits(start, 2**15 - 1)
    checks["prbs15_balance"] = sum(bits) == 2**14

    model = train_binary([[0.0, 0.0], [1.0, 1.0]], [-1, 1], Kernel("linear"), C=10.0, standardize=False)
    grid = [(0.0, 0.0), (1.0, 1.0), (0.5, 0.5), (2.0, -1.0), (0.25, 0.0)]
    checks["svm_two_point_closed_form"] = all(
        abs(decision(model, list(x)) - (x[0] + x[1] - 1.0)) <= 1e-3 for x in grid
    )
    for name, ok in checks.items():
        logger.info("selftest %s: %s", name, "ok" if ok else "FAILED")
    return checks
