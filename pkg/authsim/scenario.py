"""
Scenario files: schema, loading and seed resolution.

A scenario is a JSON object with ``"schema_version": 1``. Every record is a
strict pydantic model (unknown keys rejected); validation failures surface as
:class:`~authsim.errors.SchemaError` carrying the dotted path of the first
offending field.
"""

from __future__ import annotations

import json
import os
from pathlib import Path
from typing import Any, Dict, Literal, Optional, Tuple

from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator

from .adversary import AdversaryConfig, AdversaryKind
from .channel import ChannelConfig
from .errors import ParseError, SchemaError
from .messages import CostModel
from .protocol import DEFAULT_ATTRIBUTE_SETS, ProtocolParams
from .puf import PufParams
from .trust import DETECTOR_ATTRIBUTES, KNOWN_ATTRIBUTES, TrustPolicy

SEED_ENV = "AUTHSIM_SEED"


def _default_adversaries() -> Tuple[AdversaryConfig, ...]:
    return tuple(AdversaryConfig(kind=k) for k in AdversaryKind)


class Scenario(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)

    schema_version: Literal[1] = 1
    name: str = Field("default", min_length=1)
    master_seed: Optional[int] = Field(None, ge=0, lt=2**64)
    channel: ChannelConfig = ChannelConfig()
    protocol: ProtocolParams = ProtocolParams()
    trust: TrustPolicy = TrustPolicy()
    attribute_sets: Tuple[Tuple[str, ...], ...] = DEFAULT_ATTRIBUTE_SETS
    adversaries: Tuple[AdversaryConfig, ...] = Field(default_factory=_default_adversaries)
    n_sessions: int = Field(100, ge=1)
    n_slots: int = Field(50, ge=1)
    cost_model: CostModel = CostModel()
    fleet_sizes: Tuple[int, ...] = (10, 100, 1000)
    puf: PufParams = PufParams()
    record_wall_time: bool = False

    @field_validator("attribute_sets")
    @classmethod
    def _attribute_names(cls, v: Tuple[Tuple[str, ...], ...]) -> Tuple[Tuple[str, ...], ...]:
        if not v:
            raise ValueError("attribute_sets must contain at least one set")
        for s in v:
            unknown = set(s) - set(KNOWN_ATTRIBUTES)
            if unknown:
                raise ValueError(f"unknown attribute(s) {sorted(unknown)}; known: {list(KNOWN_ATTRIBUTES)}")
            if not set(s) & set(DETECTOR_ATTRIBUTES):
                raise ValueError(f"attribute set {list(s)} needs at least one of {list(DETECTOR_ATTRIBUTES)}")
        return v

    @field_validator("fleet_sizes")
    @classmethod
    def _fleet(cls, v: Tuple[int, ...]) -> Tuple[int, ...]:
        if not v or any(n < 1 for n in v):
            raise ValueError("fleet_sizes must be a non-empty list of positive integers")
        return v


def _error_path(loc: Tuple[Any, ...]) -> str:
    return ".".join(str(p) for p in loc)


def parse_scenario(obj: Any) -> Scenario:
    if not isinstance(obj, dict):
        raise SchemaError(f"Scenario must be a JSON object, got {type(obj).__name__}", path="")
    try:
        return Scenario.model_validate(obj)
    except ValidationError as exc:
        errors = exc.errors()
        first = errors[0]
        path = _error_path(first["loc"])
        detail = "; ".join(f"{_error_path(e['loc']) or '<root>'}: {e['msg']}" for e in errors)
        raise SchemaError(f"Invalid scenario at {path or '<root>'}: {detail}", path=path) from exc


def load_scenario(path: Path | str) -> Scenario:
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"Missing scenario file: {path}")
    try:
        obj = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise ParseError(f"{path}: invalid JSON ({exc})") from exc
    return parse_scenario(obj)


def resolve_seed(scenario: Scenario, cli_seed: Optional[int] = None) -> int:
    """``--seed`` > file ``master_seed`` > ``AUTHSIM_SEED`` > 0."""
    if cli_seed is not None:
        return int(cli_seed)
    if scenario.master_seed is not None:
        return scenario.master_seed
    env = os.environ.get(SEED_ENV)
    if env:
        try:
            return int(env, 0)
        except ValueError as exc:
            raise ParseError(f"{SEED_ENV}={env!r} is not an integer") from exc
    return 0


def scenario_schema() -> Dict[str, Any]:
    return Scenario.model_json_schema()
