"""
Attacker behaviours interposed on a device's session.

Adversaries see every message on the air (Dolev-Yao on messages) but never
endpoint-internal state. When its switch is off an adversary is a pure
observer: it draws nothing from any stream the legitimate run uses, so the
transcript is the adversary-free one.

The session stage counts as slot 0 of the switch schedule; ongoing-access
slots are numbered from 1.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from enum import Enum
from typing import Dict, Iterable, List, Optional, Sequence, Tuple

from pydantic import BaseModel, ConfigDict, Field, field_validator

from .channel import AttributeVector, ChannelConfig, ProbeSequence
from .errors import EmptyPopulation
from .messages import Message, MessageKind, Outcome, Authenticated
from .prbs import VerificationTag, derive_seed, make_tag
from .quantizer import QuantizerModel, quantize
from .rng import RngStream

logger = logging.getLogger(__name__)


class AdversaryKind(str, Enum):
    EAVESDROPPER = "Eavesdropper"
    IP_SPOOF_IMPERSONATOR = "IpSpoofImpersonator"
    ATTRIBUTE_FORGER = "AttributeForger"
    REPLAYER = "Replayer"


class AdversaryConfig(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)

    kind: AdversaryKind
    attack_probability: float = Field(1.0, ge=0.0, le=1.0, description="per-slot attacking-behaviour probability")
    rho_eve: float = Field(0.0, ge=0.0, lt=1.0)
    switch_schedule: Tuple[Tuple[int, bool], ...] = Field(
        (), description="(start_slot, on) pairs, ascending; empty = always on"
    )
    cfo_offset_hz: float = Field(400.0, description="impersonator oscillator offset from the device")
    forgery_sigma: float = Field(5.0, ge=0.0, description="noise the forger adds to enrolled attributes (dB, Hz)")
    rssi_offset_db: float = Field(0.0, description="mean RSSI shift of the adversary's own link")

    @field_validator("switch_schedule")
    @classmethod
    def _ascending(cls, v: Tuple[Tuple[int, bool], ...]) -> Tuple[Tuple[int, bool], ...]:
        starts = [s for s, _ in v]
        if any(s < 0 for s in starts):
            raise ValueError("switch_schedule slots must be >= 0")
        if any(b <= a for a, b in zip(starts, starts[1:])):
            raise ValueError("switch_schedule slots must be strictly ascending")
        return v


@dataclass(frozen=True)
class EnrollmentProfile:
    """What is publicly learnable about an enrolled device's emissions."""

    mean_rssi: float
    mean_cfo: float
    cfo_slope: float


class Adversary:
    """Base behaviour: passive recorder with an on/off switch."""

    owns_link = True

    def __init__(self, config: AdversaryConfig, rng: RngStream) -> None:
        self.config = config
        self.rng = rng
        self.captured: List[Message] = []
        self._behaviour = rng.child("behaviour").generator()

    @property
    def kind(self) -> AdversaryKind:
        return self.config.kind

    def active(self, slot: int) -> bool:
        state = True
        for start, on in self.config.switch_schedule:
            if start <= slot:
                state = bool(on)
            else:
                break
        return state

    def ever_active(self, n_slots: int) -> bool:
        return any(self.active(s) for s in range(n_slots + 1))

    def observe(self, messages: Iterable[Message]) -> None:
        self.captured.extend(messages)

    def link_stream(self, label: str) -> RngStream:
        return self.rng.child(f"link/{label}")

    def link_cfo(self, cfg: ChannelConfig) -> float:
        return cfg.cfo_eve

    def shift(self, samples: Sequence[AttributeVector]) -> List[AttributeVector]:
        off = self.config.rssi_offset_db
        if off == 0.0:
            return list(samples)
        return [AttributeVector(s.rssi + off, s.cfo, s.round_index) for s in samples]

    def responder_samples(
        self, seq: ProbeSequence, profile: EnrollmentProfile
    ) -> Optional[List[AttributeVector]]:
        return None

    def guess_tag(
        self, model: QuantizerModel, samples: Optional[List[AttributeVector]], nonce: bytes
    ) -> Optional[VerificationTag]:
        """Seed guess from whatever measurements the adversary holds."""
        if samples is None:
            return None
        try:
            seed = derive_seed(quantize(model, samples))
        except ValueError as exc:
            logger.debug("%s could not derive a seed: %s", self.kind.value, exc)
            return None
        return make_tag(seed, nonce)

    def slot_override(self, slot: int) -> Optional[Dict[str, int]]:
        return None

    def attack_flag(self, slot: int) -> bool:
        if not self.active(slot) or self.config.attack_probability <= 0.0:
            return False
        return bool(self._behaviour.random() < self.config.attack_probability)


class Eavesdropper(Adversary):
    """Listens to the legitimate link and substitutes its own measurements."""

    owns_link = False

    def responder_samples(self, seq, profile):
        return list(seq.eve)


class IpSpoofImpersonator(Adversary):
    """Claims the device's allowlisted IP and runs the protocol on its own link."""

    def link_cfo(self, cfg: ChannelConfig) -> float:
        return cfg.cfo_device + self.config.cfo_offset_hz

    def responder_samples(self, seq, profile):
        return self.shift(seq.device)


class AttributeForger(Adversary):
    """Presents the enrolled mean attributes plus forgery noise."""

    def responder_samples(self, seq, profile):
        gen = self.rng.child(f"forge/{seq.gateway[0].round_index}").generator()
        noise = gen.standard_normal((len(seq.gateway), 2))
        return [
            AttributeVector(
                profile.mean_rssi + self.config.forgery_sigma * noise[k, 0],
                profile.mean_cfo + self.config.forgery_sigma * noise[k, 1],
                g.round_index,
            )
            for k, g in enumerate(seq.gateway)
        ]


class Replayer(Adversary):
    """Re-emits captured VerifyTag / SlotTransmission messages."""

    def guess_tag(self, model, samples, nonce):
        for m in reversed(self.captured):
            if m.kind is MessageKind.VERIFY_TAG:
                return VerificationTag.from_payload(m.payload["tag"])
        return None

    def slot_override(self, slot: int) -> Optional[Dict[str, int]]:
        if not self.active(slot):
            return None
        for m in reversed(self.captured):
            if m.kind is MessageKind.SLOT_TRANSMISSION:
                return {"channel": int(m.payload["channel"]), "round": int(m.payload["round"])}
        return None


_KINDS = {
    AdversaryKind.EAVESDROPPER: Eavesdropper,
    AdversaryKind.IP_SPOOF_IMPERSONATOR: IpSpoofImpersonator,
    AdversaryKind.ATTRIBUTE_FORGER: AttributeForger,
    AdversaryKind.REPLAYER: Replayer,
}


def make_adversary(config: AdversaryConfig, rng: RngStream) -> Adversary:
    return _KINDS[AdversaryKind(config.kind)](config, rng)


@dataclass(frozen=True)
class SessionRecord:
    """Final outcome of one session, labelled for error-rate accounting."""

    device_id: str
    label: str  # "legitimate" | "adversarial"
    outcome: Outcome
    adversary: Optional[str] = None


def far_frr(results: Sequence[SessionRecord]) -> Tuple[float, float]:
    """``(FAR, FRR)``.

    FAR: adversarial sessions still Authenticated at the end (never
    terminated). FRR: legitimate sessions Rejected or Terminated.
    """
    adv = [r for r in results if r.label == "adversarial"]
    legit = [r for r in results if r.label == "legitimate"]
    if not adv or not legit:
        raise EmptyPopulation(
            f"Need both populations (legitimate={len(legit)}, adversarial={len(adv)})"
        )
    far = sum(1 for r in adv if isinstance(r.outcome, Authenticated)) / len(adv)
    frr = sum(1 for r in legit if not isinstance(r.outcome, Authenticated)) / len(legit)
    return far, frr


def act(
    adversary: Adversary,
    slot: int,
    *,
    seq: Optional[ProbeSequence] = None,
    profile: Optional[EnrollmentProfile] = None,
) -> Optional[object]:
    """Single entry point for an adversary's move at ``slot``.

    Slot 0 (session stage) returns substituted measurements; later slots
    return an injected SlotTransmission payload. ``None`` when switched off
    or when the behaviour has nothing to inject.
    """
    if not adversary.active(slot):
        return None
    if slot == 0:
        if seq is None or profile is None:
            return None
        return adversary.responder_samples(seq, profile)
    return adversary.slot_override(slot)
