"""
Stored-CRP PUF challenge-response baseline.

The gateway keeps ``crp_table_size`` challenge/response pairs per device for
the whole fleet. Each authentication consumes one random unused challenge;
the device answers with its (noisy) PUF response and the gateway accepts when
the Hamming distance stays within ``floor(threshold_fraction * bits)``.

The PUF itself is modelled as HMAC-SHA256 keyed with a per-device secret,
truncated to ``response_bits``.
"""

from __future__ import annotations

import hashlib
import hmac
import logging
import math
import time
from dataclasses import dataclass, field
from typing import Dict, List, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, model_validator

from .errors import ChallengeExhausted, ParameterDomain
from .messages import (
    Authenticated,
    CostModel,
    MessageKind,
    Rejected,
    SessionTranscript,
    make_message,
)
from .prbs import sha256_blocks
from .rng import RngStream

logger = logging.getLogger(__name__)

CHALLENGE_BYTES = 16


class PufParams(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)

    crp_table_size: int = Field(1000, ge=1)
    response_bits: int = Field(64, ge=8, le=256)
    noise_bits: int = Field(2, ge=0)
    threshold_fraction: float = Field(0.1, ge=0.0, le=1.0)

    @model_validator(mode="after")
    def _check_noise(self) -> "PufParams":
        if self.noise_bits > self.response_bits:
            raise ValueError("noise_bits cannot exceed response_bits")
        return self

    @property
    def threshold(self) -> int:
        return math.floor(self.threshold_fraction * self.response_bits)


def puf_response(secret: bytes, challenge: bytes, bits: int) -> int:
    digest = hmac.new(secret, challenge, hashlib.sha256).digest()
    return int.from_bytes(digest, "big") >> (256 - bits)


def flip_bits(value: int, n_flips: int, width: int, rng: np.random.Generator) -> int:
    """Flip exactly ``n_flips`` distinct bit positions."""
    if n_flips == 0:
        return value
    positions = rng.choice(width, size=n_flips, replace=False)
    for p in positions:
        value ^= 1 << int(p)
    return value


def hamming(a: int, b: int) -> int:
    return (a ^ b).bit_count()


@dataclass
class PufGateway:
    """CRP database plus the set of already-used challenges."""

    params: PufParams = field(default_factory=PufParams)
    tables: Dict[str, List[Tuple[bytes, int]]] = field(default_factory=dict)

    def enroll(self, device_id: str, secret: bytes, rng: np.random.Generator) -> None:
        entries = []
        for _ in range(self.params.crp_table_size):
            c = rng.bytes(CHALLENGE_BYTES)
            entries.append((c, puf_response(secret, c, self.params.response_bits)))
        self.tables[device_id] = entries

    def draw_challenge(self, device_id: str, rng: np.random.Generator) -> Tuple[bytes, int]:
        table = self.tables.get(device_id)
        if not table:
            raise ChallengeExhausted(f"No unused CRPs left for {device_id!r}")
        idx = int(rng.integers(len(table)))
        return table.pop(idx)


def run_puf_baseline(
    device_id: str,
    n_devices: int,
    crp_table_size: int,
    noise_bits: int,
    rng: RngStream,
    *,
    params: PufParams | None = None,
    cost_model: CostModel | None = None,
    grant_level: int = 3,
    gateway: PufGateway | None = None,
    record_wall_time: bool = False,
) -> SessionTranscript:
    """One PUF authentication of ``device_id`` in a fleet of ``n_devices``."""
    if n_devices < 1:
        raise ParameterDomain(f"n_devices must be >= 1 (got {n_devices})")
    base = (params or PufParams()).model_dump()
    params = PufParams(**{**base, "crp_table_size": crp_table_size, "noise_bits": noise_bits})
    costs = cost_model or CostModel()
    t0 = time.perf_counter()

    gen = rng.generator()
    secret = gen.bytes(32)
    if gateway is None:
        gateway = PufGateway(params)
        gateway.enroll(device_id, secret, gen)

    challenge, expected = gateway.draw_challenge(device_id, gen)
    compute = costs.puf_crp_lookup_per_entry * n_devices * params.crp_table_size
    msgs = [make_message(MessageKind.PUF_CHALLENGE, "gateway", device_id, {"challenge": challenge.hex()}, costs)]

    raw = puf_response(secret, challenge, params.response_bits)
    compute += costs.hash_per_block * sha256_blocks(64 + CHALLENGE_BYTES) * 2
    answered = flip_bits(raw, params.noise_bits, params.response_bits, gen)
    width_hex = (params.response_bits + 3) // 4
    msgs.append(
        make_message(
            MessageKind.PUF_RESPONSE,
            device_id,
            "gateway",
            {"response": format(answered, f"0{width_hex}x")},
            costs,
        )
    )

    distance = hamming(answered, expected)
    if distance <= params.threshold:
        outcome = Authenticated(grant_level)
        msgs.append(make_message(MessageKind.ACCESS_GRANT, "gateway", device_id, {"level": grant_level}, costs))
    else:
        outcome = Rejected("PufMismatch")
    logger.debug("puf %s: distance=%d threshold=%d -> %s", device_id, distance, params.threshold, outcome)

    total = sum(m.abstract_cost for m in msgs) + compute
    wall = time.perf_counter() - t0 if record_wall_time else total * costs.seconds_per_unit
    return SessionTranscript(
        session_id=f"{device_id}/puf",
        device_id=device_id,
        scheme="puf",
        messages=tuple(msgs),
        outcome=outcome,
        compute_cost=compute,
        wall_time_s=wall,
        diagnostics={"hamming_distance": distance, "threshold": params.threshold},
    )
