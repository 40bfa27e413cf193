"""
Seed derivation, PRBS generation and hash verification.

Both endpoints hash their quantized bits into a 256-bit seed, prove
possession of it with a nonce-bound SHA-256 tag (the seed itself never goes
on the wire) and expand it through an ITU-T O.150 Fibonacci LFSR into the
shared time/frequency slot schedule.
"""

from __future__ import annotations

import hashlib
import hmac
from dataclasses import dataclass
from typing import Any, Dict, Tuple

import numpy as np

from .errors import InsufficientEntropy, ParameterDomain
from .quantizer import BitMaterial

SEED_DOMAIN = b"iomt-authsim/seed/v1"
LFSR_DOMAIN = b"iomt-authsim/lfsr/v1"
TAG_DOMAIN = b"iomt-authsim/tag/v1"
AMPLIFY_DOMAIN = b"iomt-authsim/amplify/v1"
WRAP_DOMAIN = b"iomt-authsim/wrap/v1"

MIN_SEED_BITS = 64
NONCE_BYTES = 16

# width -> (high tap, low tap), zero-based bit positions
TAPS: Dict[int, Tuple[int, int]] = {
    15: (14, 13),  # x^15 + x^14 + 1
    31: (30, 27),  # x^31 + x^28 + 1
}
POLYNOMIALS = {15: "x^15+x^14+1", 31: "x^31+x^28+1"}


@dataclass(frozen=True)
class Seed:
    value: bytes

    def __post_init__(self) -> None:
        if len(self.value) != 32:
            raise ParameterDomain(f"Seed must be 32 bytes (got {len(self.value)})")

    def __repr__(self) -> str:
        return "Seed(<redacted>)"


@dataclass(frozen=True)
class LfsrState:
    register: int
    width: int

    def __post_init__(self) -> None:
        if self.width not in TAPS:
            raise ParameterDomain(f"LFSR width must be one of {sorted(TAPS)} (got {self.width})")
        if not 0 < self.register < (1 << self.width):
            raise ParameterDomain(f"LFSR register must be nonzero and fit {self.width} bits")

    @property
    def taps(self) -> str:
        return POLYNOMIALS[self.width]


@dataclass(frozen=True)
class VerificationTag:
    digest: bytes
    nonce: bytes

    def to_payload(self) -> Dict[str, Any]:
        return {"nonce": self.nonce.hex(), "digest": self.digest.hex()}

    @classmethod
    def from_payload(cls, payload: Dict[str, Any]) -> "VerificationTag":
        return cls(digest=bytes.fromhex(payload["digest"]), nonce=bytes.fromhex(payload["nonce"]))


def sha256_blocks(n_bytes: int) -> int:
    """Compression-function calls SHA-256 spends on an ``n_bytes`` message."""
    return (n_bytes + 9 + 63) // 64


def seed_hash_blocks(n_bits: int) -> int:
    return sha256_blocks(len(SEED_DOMAIN) + (n_bits + 7) // 8 + 8)


TAG_HASH_BLOCKS = sha256_blocks(len(TAG_DOMAIN) + NONCE_BYTES + 32)


def pack_bits(bits: BitMaterial) -> bytes:
    return np.packbits(bits.as_array(), bitorder="big").tobytes()


def derive_seed(bits: BitMaterial) -> Seed:
    n = len(bits)
    if n < MIN_SEED_BITS:
        raise InsufficientEntropy(f"Need >= {MIN_SEED_BITS} quantized bits for a seed (got {n})")
    digest = hashlib.sha256(SEED_DOMAIN + pack_bits(bits) + n.to_bytes(8, "big")).digest()
    return Seed(digest)


def _register_from_digest(digest: bytes, width: int) -> int:
    register = int.from_bytes(digest, "big") >> (len(digest) * 8 - width)
    return register or 1


def lfsr_init(seed: Seed, width: int = 31) -> LfsrState:
    if width not in TAPS:
        raise ParameterDomain(f"LFSR width must be one of {sorted(TAPS)} (got {width})")
    digest = hashlib.sha256(LFSR_DOMAIN + seed.value).digest()
    return LfsrState(_register_from_digest(digest, width), width)


def prbs_next(state: LfsrState) -> Tuple[int, LfsrState]:
    hi, lo = TAPS[state.width]
    r = state.register
    bit = ((r >> hi) ^ (r >> lo)) & 1
    r = ((r << 1) | bit) & ((1 << state.width) - 1)
    return bit, LfsrState(r, state.width)


def prbs_bits(state: LfsrState, n: int) -> Tuple[list[int], LfsrState]:
    hi, lo = TAPS[state.width]
    mask = (1 << state.width) - 1
    r = state.register
    out = []
    for _ in range(n):
        bit = ((r >> hi) ^ (r >> lo)) & 1
        r = ((r << 1) | bit) & mask
        out.append(bit)
    return out, LfsrState(r, state.width)


def slot(state: LfsrState, n_channels: int, m: int) -> Tuple[int, LfsrState]:
    """Next channel index: ``m`` PRBS bits read big-endian, mod ``n_channels``."""
    if n_channels < 1 or m < 1:
        raise ParameterDomain(f"n_channels and m must be >= 1 (got {n_channels}, {m})")
    if (1 << m) < n_channels:
        raise ParameterDomain(f"2^{m} < {n_channels}: not enough bits per slot")
    bits, state = prbs_bits(state, m)
    v = 0
    for b in bits:
        v = (v << 1) | b
    return v % n_channels, state


def _tag_digest(seed: Seed, nonce: bytes) -> bytes:
    return hashlib.sha256(TAG_DOMAIN + nonce + seed.value).digest()


def make_tag(seed: Seed, nonce: bytes) -> VerificationTag:
    if len(nonce) != NONCE_BYTES:
        raise ParameterDomain(f"nonce must be {NONCE_BYTES} bytes (got {len(nonce)})")
    return VerificationTag(digest=_tag_digest(seed, nonce), nonce=bytes(nonce))


def check_tag(seed: Seed, tag: VerificationTag) -> bool:
    if len(tag.nonce) != NONCE_BYTES:
        return False
    return hmac.compare_digest(_tag_digest(seed, tag.nonce), tag.digest)


def amplify(seed: Seed) -> bytes:
    """Privacy-amplified session key (key-generation comparison mode)."""
    return hashlib.sha256(AMPLIFY_DOMAIN + seed.value).digest()


def wrap_key(seed: Seed, nonce: bytes, key: bytes) -> bytes:
    pad = hashlib.sha256(WRAP_DOMAIN + nonce + seed.value).digest()
    return bytes(a ^ b for a, b in zip(key, pad))


unwrap_key = wrap_key
