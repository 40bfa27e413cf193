"""
Correlated physical-layer attribute generator.

One probing round produces an RSSI/CFO pair at the device, at the gateway
and at an eavesdropper. RSSI shares an AR(1) latent channel state across
endpoints (reciprocity); CFO is a per-transmitter hardware constant plus a
linear drift and observation noise (identity, not reciprocity).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import List, Optional, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, Field

from .rng import RngStream

# standard-normal draws consumed per round, in order:
# latent innovation, device/gateway/eve RSSI noise, device/gateway/eve CFO noise
DRAWS_PER_ROUND = 7


class ChannelConfig(BaseModel):
    """Generative channel parameters (a sub-record of the scenario file)."""

    model_config = ConfigDict(extra="forbid", frozen=True)

    rho: float = Field(0.99, ge=0.0, le=1.0, description="device/gateway RSSI correlation")
    rho_eve: float = Field(0.0, ge=0.0, lt=1.0, description="eavesdropper correlation with the latent channel")
    phi: float = Field(0.9, ge=0.0, lt=1.0, description="AR(1) coefficient of the latent channel")
    mu_rssi: float = Field(-60.0, description="mean RSSI, dBm")
    sigma_rssi: float = Field(4.0, ge=0.0, description="RSSI spread, dB")
    cfo_device: float = Field(1000.0, description="device oscillator offset, Hz")
    cfo_eve: float = Field(1500.0, description="eavesdropper oscillator offset, Hz")
    cfo_drift: float = Field(1.0, description="CFO drift, Hz per round")
    sigma_cfo: float = Field(1.0, ge=0.0, description="CFO observation noise, Hz")


@dataclass(frozen=True)
class AttributeVector:
    """One round's measurements at one endpoint."""

    rssi: float
    cfo: float
    round_index: int

    def features(self) -> Tuple[float, float]:
        return (self.rssi, self.cfo)


@dataclass(frozen=True)
class ProbeSequence:
    device: List[AttributeVector]
    gateway: List[AttributeVector]
    eve: List[AttributeVector]
    latent: float

    def __len__(self) -> int:
        return len(self.gateway)


def _round_from_draws(
    cfg: ChannelConfig,
    prev_latent: Optional[float],
    draws: np.ndarray,
    round_index: int,
    n_symbols: int,
    cfo_transmitter: float,
) -> Tuple[AttributeVector, AttributeVector, AttributeVector, float]:
    z_latent, n_dev, n_gw, n_eve, c_dev, c_gw, c_eve = (float(v) for v in draws)
    if prev_latent is None:
        latent = z_latent
    else:
        latent = cfg.phi * prev_latent + math.sqrt(1.0 - cfg.phi * cfg.phi) * z_latent

    avg = 1.0 / math.sqrt(n_symbols)
    shared = math.sqrt(cfg.rho)
    private = math.sqrt(1.0 - cfg.rho) * avg
    eve_shared = math.sqrt(cfg.rho_eve)
    eve_private = math.sqrt(1.0 - cfg.rho_eve) * avg

    rssi_dev = cfg.mu_rssi + cfg.sigma_rssi * (shared * latent + private * n_dev)
    rssi_gw = cfg.mu_rssi + cfg.sigma_rssi * (shared * latent + private * n_gw)
    rssi_eve = cfg.mu_rssi + cfg.sigma_rssi * (eve_shared * latent + eve_private * n_eve)

    drift = cfg.cfo_drift * round_index
    sigma_c = cfg.sigma_cfo * avg
    cfo_dev = cfo_transmitter + drift + sigma_c * c_dev
    cfo_gw = cfo_transmitter + drift + sigma_c * c_gw
    cfo_eve = cfg.cfo_eve + drift + sigma_c * c_eve

    return (
        AttributeVector(rssi_dev, cfo_dev, round_index),
        AttributeVector(rssi_gw, cfo_gw, round_index),
        AttributeVector(rssi_eve, cfo_eve, round_index),
        latent,
    )


def probe_round(
    cfg: ChannelConfig,
    prev_latent: Optional[float],
    rng: RngStream | np.random.Generator,
    round_index: int = 0,
    *,
    n_symbols: int = 1,
    cfo_transmitter: Optional[float] = None,
) -> Tuple[AttributeVector, AttributeVector, AttributeVector, float]:
    """Draw one probing round: ``(device, gateway, eve, latent)``.

    ``cfo_transmitter`` replaces ``cfg.cfo_device`` when someone other than
    the enrolled device is on the link. ``n_symbols`` averages endpoint
    measurement noise over that many symbols (1 = a single probe). An
    ``RngStream`` is turned into a fresh generator, so the same stream always
    yields the same round.
    """
    if n_symbols < 1:
        raise ValueError(f"n_symbols must be >= 1 (got {n_symbols})")
    gen = rng.generator() if isinstance(rng, RngStream) else rng
    draws = gen.standard_normal(DRAWS_PER_ROUND)
    cfo_tx = cfg.cfo_device if cfo_transmitter is None else cfo_transmitter
    return _round_from_draws(cfg, prev_latent, draws, round_index, n_symbols, cfo_tx)


def probe_sequence(
    cfg: ChannelConfig,
    n_rounds: int,
    rng: RngStream | np.random.Generator,
    *,
    start_round: int = 0,
    prev_latent: Optional[float] = None,
    cfo_transmitter: Optional[float] = None,
    hop: bool = False,
) -> ProbeSequence:
    """Draw ``n_rounds`` consecutive rounds as three aligned lists.

    With ``hop`` every round sits on a fresh channel: the latent fading is
    redrawn from its stationary law instead of following the AR(1) chain.
    """
    if n_rounds < 1:
        raise ValueError(f"n_rounds must be >= 1 (got {n_rounds})")
    gen = rng.generator() if isinstance(rng, RngStream) else rng
    draws = gen.standard_normal((n_rounds, DRAWS_PER_ROUND))
    cfo_tx = cfg.cfo_device if cfo_transmitter is None else cfo_transmitter

    device: List[AttributeVector] = []
    gateway: List[AttributeVector] = []
    eve: List[AttributeVector] = []
    latent = prev_latent
    for k in range(n_rounds):
        d, g, e, latent = _round_from_draws(cfg, None if hop else latent, draws[k], start_round + k, 1, cfo_tx)
        device.append(d)
        gateway.append(g)
        eve.append(e)
    return ProbeSequence(device=device, gateway=gateway, eve=eve, latent=float(latent))


def pearson(a: List[float], b: List[float]) -> float:
    """Sample Pearson correlation; 0.0 when either side has no spread."""
    x = np.asarray(a, dtype=np.float64)
    y = np.asarray(b, dtype=np.float64)
    dx = x - x.mean()
    dy = y - y.mean()
    denom = math.sqrt(float(np.dot(dx, dx)) * float(np.dot(dy, dy)))
    if denom == 0.0:
        return 0.0
    return float(np.dot(dx, dy) / denom)
