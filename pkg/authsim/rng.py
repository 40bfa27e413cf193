"""
Named, reproducible random streams.

Every entity in a scenario (channel, device, adversary, nonce source) draws
from its own stream. A stream is identified by ``(master_seed, stream_id)``;
the id is hashed into the ``spawn_key`` of a ``numpy.random.SeedSequence``
so distinct ids give independent generators and equal ids give identical
ones, regardless of creation order.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass
from typing import Tuple

import numpy as np

MASK64 = (1 << 64) - 1


def _stream_key(stream_id: str) -> Tuple[int, ...]:
    digest = hashlib.sha256(stream_id.encode("utf-8")).digest()
    return tuple(int.from_bytes(digest[i : i + 4], "big") for i in range(0, 32, 4))


@dataclass(frozen=True)
class RngStream:
    master_seed: int
    stream_id: str = "root"

    def __post_init__(self) -> None:
        object.__setattr__(self, "master_seed", int(self.master_seed) & MASK64)

    def child(self, label: str) -> "RngStream":
        return RngStream(self.master_seed, f"{self.stream_id}/{label}")

    def seed_sequence(self) -> np.random.SeedSequence:
        return np.random.SeedSequence(entropy=self.master_seed, spawn_key=_stream_key(self.stream_id))

    def generator(self) -> np.random.Generator:
        """A fresh generator positioned at the start of this stream."""
        return np.random.Generator(np.random.PCG64(self.seed_sequence()))
