"""
Lightweight, versioned contracts for simulator outputs.

Documentation-as-code constants embedded in ``metrics.json`` so the files
stay interpretable without this repository at hand.
"""

from __future__ import annotations

from typing import Dict

from .protocol import ProtocolParams
from .trust import TrustPolicy

METRICS_PURPOSE = "authsim_metrics"
METRICS_SEMANTICS = (
    "Rates are fractions of sessions. FAR counts adversarial sessions still authenticated "
    "(never terminated) at the end of ongoing access; FRR counts legitimate sessions that were "
    "rejected or terminated. Costs are abstract units; wall_time_s is modeled as "
    "total_cost * seconds_per_unit unless the scenario records measured time."
)

METRICS_CONTRACT: Dict[str, object] = {
    "schema_version": "1",
    "purpose": METRICS_PURPOSE,
    "semantic_unit": "session",
    "trajectory_value": "effective_trust",
    "terminated_level": 0,
    "notes": METRICS_SEMANTICS,
}

TRAJECTORY_COLUMNS = ("device_id", "attribute_set", "step", "value", "level")
COST_COLUMNS = ("scheme", "n_devices", "total_cost", "wall_time_s")


def as_policy_dict(policy: TrustPolicy, params: ProtocolParams) -> Dict[str, object]:
    """Small policy block embedded in ``metrics.json``."""
    return {
        "trust": {
            "init_known": policy.init_known,
            "init_unknown": policy.init_unknown,
            "delta_up": policy.delta_up,
            "delta_down": policy.delta_down,
            "level_thresholds": list(policy.level_thresholds),
            "terminate_below": policy.terminate_below,
            "n_levels": policy.n_levels,
        },
        "protocol": {
            "mode": params.mode,
            "n_rounds": params.n_rounds,
            "guard": params.guard,
            "prbs_width": params.prbs_width,
            "seed_transmitted": False,
        },
    }
