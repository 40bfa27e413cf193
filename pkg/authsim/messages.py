"""
Protocol message vocabulary, session transcripts and cost accounting.

Each message kind has a fixed set of payload fields. Payload values must be
plain JSON data (numbers, strings, lists, dicts); endpoint secrets such as
:class:`~authsim.prbs.Seed` and :class:`~authsim.quantizer.BitMaterial` are
refused at construction, so no transcript can carry them.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from enum import Enum
from typing import Any, Dict, FrozenSet, List, Mapping, Optional, Tuple, Union

from pydantic import BaseModel, ConfigDict, Field

from .errors import ProtocolViolation
from .utils import canonical


class CostModel(BaseModel):
    """Abstract per-operation costs (integer units)."""

    model_config = ConfigDict(extra="forbid", frozen=True)

    svm_train_per_sample: int = Field(100, ge=0)
    svm_eval_per_sv: int = Field(1, ge=0)
    hash_per_block: int = Field(50, ge=0)
    lfsr_per_bit: int = Field(1, ge=0)
    puf_crp_lookup_per_entry: int = Field(40, ge=0)
    message_base: int = Field(10, ge=0)
    message_per_byte: int = Field(1, ge=0)
    seconds_per_unit: float = Field(1e-6, ge=0.0, description="modeled seconds per cost unit")


class MessageKind(str, Enum):
    PROBE_REQUEST = "ProbeRequest"
    PROBE_REPLY = "ProbeReply"
    MODEL_TRANSFER = "ModelTransfer"
    VERIFY_CHALLENGE = "VerifyChallenge"
    VERIFY_TAG = "VerifyTag"
    ACCESS_GRANT = "AccessGrant"
    SLOT_TRANSMISSION = "SlotTransmission"
    PUF_CHALLENGE = "PufChallenge"
    PUF_RESPONSE = "PufResponse"
    TERMINATE = "Terminate"
    KEY_TRANSMISSION = "KeyTransmission"


PAYLOAD_FIELDS: Dict[MessageKind, FrozenSet[str]] = {
    MessageKind.PROBE_REQUEST: frozenset({"n_rounds", "attempt"}),
    MessageKind.PROBE_REPLY: frozenset({"n_rounds", "attempt"}),
    MessageKind.MODEL_TRANSFER: frozenset({"model"}),
    MessageKind.VERIFY_CHALLENGE: frozenset({"nonce"}),
    MessageKind.VERIFY_TAG: frozenset({"tag"}),
    MessageKind.ACCESS_GRANT: frozenset({"level"}),
    MessageKind.SLOT_TRANSMISSION: frozenset({"channel", "round"}),
    MessageKind.PUF_CHALLENGE: frozenset({"challenge"}),
    MessageKind.PUF_RESPONSE: frozenset({"response"}),
    MessageKind.TERMINATE: frozenset({"reason"}),
    MessageKind.KEY_TRANSMISSION: frozenset({"nonce", "wrapped_key"}),
}

_PLAIN = (str, int, float, bool, type(None))


def _check_plain(value: Any, path: str) -> None:
    if isinstance(value, _PLAIN):
        return
    if isinstance(value, dict):
        for k, v in value.items():
            if not isinstance(k, str):
                raise ProtocolViolation(f"Non-string key in payload at {path}")
            _check_plain(v, f"{path}.{k}")
        return
    if isinstance(value, list):
        for i, v in enumerate(value):
            _check_plain(v, f"{path}[{i}]")
        return
    raise ProtocolViolation(f"Payload field {path} holds a {type(value).__name__}; only JSON data may travel")


@dataclass(frozen=True)
class Message:
    kind: MessageKind
    sender: str
    receiver: str
    payload: Mapping[str, Any]
    abstract_cost: int = 0

    def __post_init__(self) -> None:
        kind = MessageKind(self.kind)
        object.__setattr__(self, "kind", kind)
        allowed = PAYLOAD_FIELDS[kind]
        extra = set(self.payload) - allowed
        if extra:
            raise ProtocolViolation(f"{kind.value} payload has unexpected field(s) {sorted(extra)}")
        _check_plain(dict(self.payload), kind.value)
        if self.abstract_cost < 0:
            raise ProtocolViolation("abstract_cost must be non-negative")

    def body(self) -> Dict[str, Any]:
        return {
            "kind": self.kind.value,
            "sender": self.sender,
            "receiver": self.receiver,
            "payload": dict(self.payload),
        }

    def encode(self) -> bytes:
        return canonical.dumps_bytes(self.body())

    def to_record(self) -> Dict[str, Any]:
        record = self.body()
        record["abstract_cost"] = self.abstract_cost
        return record


def make_message(
    kind: MessageKind,
    sender: str,
    receiver: str,
    payload: Mapping[str, Any],
    costs: CostModel,
) -> Message:
    """Build a message and price it at base + per-byte of its canonical payload."""
    size = len(canonical.dumps_bytes(dict(payload)))
    cost = costs.message_base + costs.message_per_byte * size
    return Message(MessageKind(kind), sender, receiver, dict(payload), cost)


@dataclass(frozen=True)
class Authenticated:
    level: int

    def to_payload(self) -> Dict[str, Any]:
        return {"status": "Authenticated", "level": self.level}


@dataclass(frozen=True)
class Rejected:
    reason: str

    def to_payload(self) -> Dict[str, Any]:
        return {"status": "Rejected", "reason": self.reason}


@dataclass(frozen=True)
class SessionTerminated:
    reason: str = "TrustBelowThreshold"

    def to_payload(self) -> Dict[str, Any]:
        return {"status": "Terminated", "reason": self.reason}


Outcome = Union[Authenticated, Rejected, SessionTerminated]


@dataclass(frozen=True)
class SessionTranscript:
    session_id: str
    device_id: str
    scheme: str
    messages: Tuple[Message, ...]
    outcome: Outcome
    compute_cost: int
    wall_time_s: float = 0.0
    diagnostics: Mapping[str, Any] = field(default_factory=dict, compare=False)

    @property
    def message_cost(self) -> int:
        return sum(m.abstract_cost for m in self.messages)

    @property
    def total_cost(self) -> int:
        return self.message_cost + self.compute_cost

    @property
    def authenticated(self) -> bool:
        return isinstance(self.outcome, Authenticated)

    def count(self, kind: MessageKind) -> int:
        return sum(1 for m in self.messages if m.kind is kind)

    def wire_bytes(self) -> List[bytes]:
        return [m.encode() for m in self.messages]

    def extended(
        self,
        messages: Tuple[Message, ...],
        compute_cost: int,
        outcome: Optional[Outcome] = None,
        wall_time_s: Optional[float] = None,
    ) -> "SessionTranscript":
        return replace(
            self,
            messages=self.messages + tuple(messages),
            compute_cost=self.compute_cost + compute_cost,
            outcome=self.outcome if outcome is None else outcome,
            wall_time_s=self.wall_time_s if wall_time_s is None else wall_time_s,
        )

    def to_jsonl(self) -> str:
        """One canonical JSON line per message."""
        return "".join(canonical.dumps(m.to_record()) + "\n" for m in self.messages)

    def summary(self) -> Dict[str, Any]:
        return {
            "session_id": self.session_id,
            "device_id": self.device_id,
            "scheme": self.scheme,
            "outcome": self.outcome.to_payload(),
            "n_messages": len(self.messages),
            "total_cost": self.total_cost,
        }
