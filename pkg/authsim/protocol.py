"""
Gateway/device authentication sessions.

A session probes the link, lets the gateway fit the quantizer and ship it to
the device, derives the seed independently on both sides and verifies it
with a nonce-bound hash tag. On success the gateway grants the level the
transmitter's trust allows; afterwards :meth:`ProtocolEngine.ongoing_access`
runs PRBS-scheduled slots with outlier-driven trust updates.

One engine owns all per-device state of a scenario (enrollment, round
clocks, live sessions). Engines are independent of each other.
"""

from __future__ import annotations

import logging
import time
from dataclasses import dataclass
from enum import Enum
from typing import Dict, List, Literal, Optional, Sequence, Tuple

from pydantic import BaseModel, ConfigDict, Field, model_validator

from .adversary import Adversary, EnrollmentProfile, act
from .channel import ChannelConfig, probe_round, probe_sequence
from .errors import AuthSimError, InsufficientData, InsufficientEntropy, ParameterDomain, ProtocolViolation
from .messages import (
    Authenticated,
    CostModel,
    Message,
    MessageKind,
    Rejected,
    SessionTerminated,
    SessionTranscript,
    make_message,
)
from .prbs import (
    LfsrState,
    Seed,
    amplify,
    check_tag,
    derive_seed,
    lfsr_init,
    TAG_HASH_BLOCKS,
    make_tag,
    seed_hash_blocks,
    sha256_blocks,
    slot,
    wrap_key,
)
from .puf import PufParams, run_puf_baseline
from .quantizer import SvmParams, bit_agreement, fit_quantizer, quantize
from .rng import RngStream
from .trust import (
    AttributeModel,
    PrimaryAttribute,
    TrajectoryPoint,
    TrustLedger,
    TrustPolicy,
    TrustState,
    authorize,
    enroll_detectors,
    init_trust,
)

logger = logging.getLogger(__name__)

GATEWAY = "gateway"
DEFAULT_ATTRIBUTE_SETS: Tuple[Tuple[str, ...], ...] = (("rssi",), ("rssi", "cfo", "attack"))


class ProtocolParams(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)

    n_rounds: int = Field(256, ge=16, description="probing rounds per attempt")
    guard: float = Field(0.3, ge=0.0, description="guard band, decision-value units")
    prbs_width: Literal[15, 31] = 31
    n_channels: int = Field(16, ge=1)
    bits_per_slot: int = Field(4, ge=1, le=31)
    svm: SvmParams = SvmParams()
    slot_symbols: int = Field(16, ge=1, description="symbols averaged per ongoing-access slot")
    max_retries: int = Field(1, ge=0, description="automatic re-probes after a failed attempt")
    mode: Literal["proposed", "key_generation"] = "proposed"
    enroll_rounds: int = Field(256, ge=16)
    enroll_nu: float = Field(0.05, gt=0.0, le=1.0)
    enroll_quantile: float = Field(0.01, ge=0.0, lt=1.0, description="enrollment decision quantile for outliers")

    @model_validator(mode="after")
    def _slot_bits(self) -> "ProtocolParams":
        if (1 << self.bits_per_slot) < self.n_channels:
            raise ValueError(f"2^bits_per_slot must be >= n_channels ({self.n_channels})")
        return self


class GatewayState(str, Enum):
    IDLE = "Idle"
    PROBING = "Probing"
    MODEL_SENT = "ModelSent"
    CHALLENGED = "Challenged"
    GRANTED = "Granted"
    REJECTED = "Rejected"
    TERMINATED = "Terminated"


class DeviceState(str, Enum):
    IDLE = "Idle"
    PROBING = "Probing"
    QUANTIZED = "Quantized"
    TAGGED = "Tagged"
    AUTHENTICATED = "Authenticated"
    TERMINATED = "Terminated"


_G = GatewayState
_D = DeviceState

GATEWAY_TRANSITIONS = {
    _G.IDLE: {_G.PROBING},
    _G.PROBING: {_G.MODEL_SENT, _G.PROBING, _G.REJECTED},
    _G.MODEL_SENT: {_G.CHALLENGED, _G.PROBING, _G.REJECTED},
    _G.CHALLENGED: {_G.GRANTED, _G.PROBING, _G.REJECTED},
    _G.GRANTED: {_G.TERMINATED},
    _G.REJECTED: set(),
    _G.TERMINATED: set(),
}

DEVICE_TRANSITIONS = {
    _D.IDLE: {_D.PROBING},
    _D.PROBING: {_D.QUANTIZED, _D.PROBING},
    _D.QUANTIZED: {_D.TAGGED},
    _D.TAGGED: {_D.AUTHENTICATED, _D.PROBING},
    _D.AUTHENTICATED: {_D.TERMINATED},
    _D.TERMINATED: set(),
}


class StateMachine:
    def __init__(self, name: str, transitions: Dict, initial) -> None:
        self.name = name
        self.transitions = transitions
        self.state = initial

    def go(self, target) -> None:
        if target not in self.transitions[self.state]:
            raise ProtocolViolation(f"{self.name}: {self.state.value} -> {target.value} is not allowed")
        self.state = target


@dataclass(frozen=True)
class Enrollment:
    device_id: str
    detectors: Dict[str, AttributeModel]
    profile: EnrollmentProfile
    compute_cost: int


@dataclass
class _LiveSession:
    device_id: str
    link_cfg: ChannelConfig
    tx_cfo: Optional[float]
    gateway_seed: Seed
    device_seed: Optional[Seed]
    gw_lfsr: LfsrState
    dev_lfsr: LfsrState
    trust: TrustState
    gateway: StateMachine
    device: StateMachine
    adversary: Optional[Adversary]
    transmitter: Optional[Adversary]


@dataclass(frozen=True)
class AccessResult:
    transcript: SessionTranscript
    trajectories: Dict[str, List[TrajectoryPoint]]


class ProtocolEngine:
    def __init__(
        self,
        params: ProtocolParams | None = None,
        policy: TrustPolicy | None = None,
        cost_model: CostModel | None = None,
        *,
        record_wall_time: bool = False,
    ) -> None:
        self.params = params or ProtocolParams()
        self.policy = policy or TrustPolicy()
        self.costs = cost_model or CostModel()
        self.record_wall_time = record_wall_time
        self._enrolled: Dict[str, Enrollment] = {}
        self._clock: Dict[str, int] = {}
        self._counter: Dict[str, int] = {}
        self._sessions: Dict[str, _LiveSession] = {}

    # -- bookkeeping -----------------------------------------------------

    def enrollment(self, device_id: str) -> Optional[Enrollment]:
        return self._enrolled.get(device_id)

    def session_seeds(self, session_id: str) -> Tuple[Seed, Optional[Seed]]:
        """Gateway and device seeds of a live session (state inspection for tests)."""
        live = self._sessions[session_id]
        return live.gateway_seed, live.device_seed

    def _advance(self, device_id: str, n: int) -> int:
        start = self._clock.get(device_id, 0)
        self._clock[device_id] = start + n
        return start

    def _wall(self, t0: float, total_cost: int) -> float:
        if self.record_wall_time:
            return time.perf_counter() - t0
        return total_cost * self.costs.seconds_per_unit

    # -- enrollment ------------------------------------------------------

    def enroll(self, device_id: str, cfg: ChannelConfig, rng: RngStream) -> Enrollment:
        """Measure the device at the gateway across hopped channels and train one detector per attribute."""
        n = self.params.enroll_rounds
        start = self._advance(device_id, n)
        seq = probe_sequence(cfg, n, rng.child("enroll"), start_round=start, hop=True)
        detectors = enroll_detectors(seq.gateway, nu=self.params.enroll_nu, quantile=self.params.enroll_quantile)
        profile = EnrollmentProfile(
            mean_rssi=sum(g.rssi for g in seq.gateway) / n,
            mean_cfo=sum(g.cfo for g in seq.gateway) / n,
            cfo_slope=detectors["cfo"].trend[0] if detectors["cfo"].trend else 0.0,
        )
        cost = self.costs.svm_train_per_sample * n * len(detectors)
        record = Enrollment(device_id, detectors, profile, cost)
        self._enrolled[device_id] = record
        logger.debug("enrolled %s over rounds %d..%d", device_id, start, start + n - 1)
        return record

    # -- authentication session -----------------------------------------

    def run_session(
        self,
        device_id: str,
        cfg: ChannelConfig,
        params: ProtocolParams | None = None,
        rng: RngStream | None = None,
        *,
        adversary: Adversary | None = None,
        primary: PrimaryAttribute | None = None,
    ) -> SessionTranscript:
        params = params or self.params
        rng = rng or RngStream(0, f"session/{device_id}")
        idx = self._counter.get(device_id, 0)
        self._counter[device_id] = idx + 1
        session_id = f"{device_id}/s{idx}"
        t0 = time.perf_counter()
        costs = self.costs

        acting = adversary if adversary is not None and adversary.active(0) else None
        own_link = acting is not None and acting.owns_link
        link_cfg = cfg
        if acting is not None and not acting.owns_link:
            link_cfg = cfg.model_copy(update={"rho_eve": acting.config.rho_eve})
        tx_cfo = acting.link_cfo(cfg) if own_link else None
        enrollment = self._enrolled.get(device_id)
        profile = enrollment.profile if enrollment else EnrollmentProfile(cfg.mu_rssi, cfg.cfo_device, cfg.cfo_drift)

        gw = StateMachine(f"gateway[{session_id}]", GATEWAY_TRANSITIONS, GatewayState.IDLE)
        dev = StateMachine(f"device[{session_id}]", DEVICE_TRANSITIONS, DeviceState.IDLE)
        nonce_gen = rng.child("nonce").generator()
        messages: List[Message] = []
        compute = 0
        diag: Dict[str, object] = {"adversary": acting.kind.value if acting else None}
        outcome = None
        live: Optional[_LiveSession] = None

        def send(kind: MessageKind, sender: str, receiver: str, payload: dict) -> Message:
            msg = make_message(kind, sender, receiver, payload, costs)
            messages.append(msg)
            if adversary is not None:
                adversary.observe([msg])
            return msg

        for attempt in range(params.max_retries + 1):
            gw.go(GatewayState.PROBING)
            dev.go(DeviceState.PROBING)
            diag["attempts"] = attempt + 1
            send(MessageKind.PROBE_REQUEST, GATEWAY, device_id, {"n_rounds": params.n_rounds, "attempt": attempt})
            send(MessageKind.PROBE_REPLY, device_id, GATEWAY, {"n_rounds": params.n_rounds, "attempt": attempt})

            start = self._advance(device_id, params.n_rounds)
            stream = acting.link_stream(f"{idx}/{attempt}") if own_link else rng.child(f"probe/{attempt}")
            seq = probe_sequence(link_cfg, params.n_rounds, stream, start_round=start, cfo_transmitter=tx_cfo)
            gw_samples = acting.shift(seq.gateway) if own_link else list(seq.gateway)
            responder = act(acting, 0, seq=seq, profile=profile) if acting is not None else list(seq.device)

            try:
                model = fit_quantizer(gw_samples, params.guard, params.svm)
            except AuthSimError as exc:
                reason = type(exc).__name__
                logger.info("%s attempt %d: quantizer failed (%s)", session_id, attempt, exc)
                if attempt < params.max_retries and isinstance(exc, InsufficientData):
                    continue
                outcome = Rejected(reason)
                gw.go(GatewayState.REJECTED)
                break
            n_sv = model.svm.n_support
            compute += costs.svm_train_per_sample * params.n_rounds + costs.svm_eval_per_sv * n_sv * params.n_rounds
            send(MessageKind.MODEL_TRANSFER, GATEWAY, device_id, {"model": model.to_payload()})
            gw.go(GatewayState.MODEL_SENT)

            gw_bits = quantize(model, gw_samples)
            diag["retained"] = len(gw_bits)
            try:
                gw_seed = derive_seed(gw_bits)
            except InsufficientEntropy as exc:
                logger.info("%s attempt %d: %s", session_id, attempt, exc)
                if attempt < params.max_retries:
                    continue
                outcome = Rejected("InsufficientEntropy")
                gw.go(GatewayState.REJECTED)
                break
            compute += costs.hash_per_block * seed_hash_blocks(len(gw_bits))

            nonce = nonce_gen.bytes(16)
            send(MessageKind.VERIFY_CHALLENGE, GATEWAY, device_id, {"nonce": nonce.hex()})
            gw.go(GatewayState.CHALLENGED)

            dev_seed: Optional[Seed] = None
            if acting is None:
                dev_bits = quantize(model, responder)
                compute += costs.svm_eval_per_sv * n_sv * len(dev_bits)
                dev_seed = derive_seed(dev_bits)
                tag = make_tag(dev_seed, nonce)
                diag["bit_agreement"] = bit_agreement(gw_bits, dev_bits)
            else:
                tag = acting.guess_tag(model, responder, nonce)
                if responder is not None:
                    try:
                        diag["bit_agreement"] = bit_agreement(gw_bits, quantize(model, responder))
                    except AuthSimError:
                        pass
            compute += costs.hash_per_block * (seed_hash_blocks(len(gw_bits)) + TAG_HASH_BLOCKS)

            if tag is None:
                outcome = Rejected("NoCredential")
                gw.go(GatewayState.REJECTED)
                break
            dev.go(DeviceState.QUANTIZED)
            dev.go(DeviceState.TAGGED)
            send(MessageKind.VERIFY_TAG, device_id, GATEWAY, {"tag": tag.to_payload()})
            compute += costs.hash_per_block * TAG_HASH_BLOCKS

            if tag.nonce == nonce and check_tag(gw_seed, tag):
                gw.go(GatewayState.GRANTED)
                dev.go(DeviceState.AUTHENTICATED)
                claim = primary or (
                    PrimaryAttribute.KNOWN_IP if (enrollment is not None or acting is not None) else PrimaryAttribute.UNKNOWN_IP
                )
                trust = init_trust(claim, self.policy)
                level = authorize(trust, self.policy)
                if params.mode == "key_generation":
                    session_key = amplify(gw_seed)
                    wrap_nonce = nonce_gen.bytes(16)
                    compute += costs.hash_per_block * 2 * sha256_blocks(64)
                    send(
                        MessageKind.KEY_TRANSMISSION,
                        GATEWAY,
                        device_id,
                        {"nonce": wrap_nonce.hex(), "wrapped_key": wrap_key(gw_seed, wrap_nonce, session_key).hex()},
                    )
                    diag["privacy_amplification"] = True
                send(MessageKind.ACCESS_GRANT, GATEWAY, device_id, {"level": level.level})
                outcome = Authenticated(level.level)
                compute += costs.hash_per_block * sha256_blocks(64) + costs.lfsr_per_bit * params.prbs_width
                live = _LiveSession(
                    device_id=device_id,
                    link_cfg=link_cfg,
                    tx_cfo=tx_cfo,
                    gateway_seed=gw_seed,
                    device_seed=dev_seed,
                    gw_lfsr=lfsr_init(gw_seed, params.prbs_width),
                    dev_lfsr=lfsr_init(gw_seed if dev_seed is None else dev_seed, params.prbs_width),
                    trust=trust,
                    gateway=gw,
                    device=dev,
                    adversary=adversary,
                    transmitter=acting if own_link else None,
                )
                break

            if attempt < params.max_retries:
                logger.warning("%s: seed mismatch on attempt %d, re-probing", session_id, attempt)
                continue
            outcome = Rejected("SeedMismatch")
            gw.go(GatewayState.REJECTED)

        if outcome is None:
            outcome = Rejected("RetriesExhausted")
        diag["seed_match"] = isinstance(outcome, Authenticated)
        if live is not None:
            self._sessions[session_id] = live
        total = sum(m.abstract_cost for m in messages) + compute
        transcript = SessionTranscript(
            session_id=session_id,
            device_id=device_id,
            scheme=params.mode,
            messages=tuple(messages),
            outcome=outcome,
            compute_cost=compute,
            wall_time_s=self._wall(t0, total),
            diagnostics=diag,
        )
        logger.info("%s -> %s", session_id, outcome)
        return transcript

    # -- ongoing slotted access -----------------------------------------

    def ongoing_access(
        self,
        session: SessionTranscript,
        n_slots: int,
        rng: RngStream | None = None,
        *,
        attribute_sets: Sequence[Sequence[str]] = DEFAULT_ATTRIBUTE_SETS,
    ) -> AccessResult:
        """Run ``n_slots`` PRBS-scheduled slots after a successful session.

        The last attribute set drives the real gateway decisions (messages,
        termination); the others are evaluated on the same measurements so
        their trajectories can be compared.
        """
        if not isinstance(session.outcome, Authenticated):
            raise ProtocolViolation(f"{session.session_id} is not authenticated")
        if self.params.mode == "key_generation":
            raise ProtocolViolation("key_generation mode issues a static key; no ongoing access")
        live = self._sessions.get(session.session_id)
        if live is None:
            raise ProtocolViolation(f"No live session state for {session.session_id}")
        if live.gateway.state is not GatewayState.GRANTED:
            raise ProtocolViolation(f"{session.session_id} gateway is {live.gateway.state.value}; slots refused")
        enrollment = self._enrolled.get(live.device_id)
        if enrollment is None:
            raise ProtocolViolation(f"{live.device_id} has no enrolled detectors")
        if n_slots < 1:
            raise ParameterDomain(f"n_slots must be >= 1 (got {n_slots})")
        if not attribute_sets:
            raise ParameterDomain("attribute_sets must not be empty")

        t0 = time.perf_counter()
        params = self.params
        costs = self.costs
        rng = rng or RngStream(0, f"slots/{session.session_id}")
        tx = live.transmitter
        stream = tx.link_stream(f"{session.session_id}/slots") if tx is not None else rng.child("slots")
        gen = stream.generator()
        ledgers = [TrustLedger.start(s, self.policy, live.trust) for s in attribute_sets]
        authority = ledgers[-1]
        messages: List[Message] = []
        compute = 0
        outcome = None
        latent = None
        prev_channel = None
        device_id = live.device_id

        for s in range(1, n_slots + 1):
            r = self._advance(device_id, 1)
            ch_dev, live.dev_lfsr = slot(live.dev_lfsr, params.n_channels, params.bits_per_slot)
            ch_gw, live.gw_lfsr = slot(live.gw_lfsr, params.n_channels, params.bits_per_slot)
            compute += 2 * costs.lfsr_per_bit * params.bits_per_slot

            # fading only persists while the link stays on one channel
            carried = latent if ch_dev == prev_channel else None
            prev_channel = ch_dev
            _, measured, _, latent = probe_round(
                live.link_cfg, carried, gen, r, n_symbols=params.slot_symbols, cfo_transmitter=live.tx_cfo
            )
            if tx is not None:
                measured = tx.shift([measured])[0]

            payload = {"channel": ch_dev, "round": r}
            attack = False
            if live.adversary is not None:
                injected = act(live.adversary, s)
                if injected is not None:
                    payload = injected
                attack = live.adversary.attack_flag(s)

            compute += sum(costs.svm_eval_per_sv * det.model.n_support for det in enrollment.detectors.values())
            channel_ok = payload["channel"] == ch_gw and payload["round"] == r

            was_live = not authority.state.terminated
            if was_live:
                if live.gateway.state is not GatewayState.GRANTED:
                    raise ProtocolViolation("SlotTransmission after Terminate")
                msg = make_message(MessageKind.SLOT_TRANSMISSION, device_id, GATEWAY, payload, costs)
                messages.append(msg)
                if live.adversary is not None:
                    live.adversary.observe([msg])

            for ledger in ledgers:
                ledger.step(s, ledger.observe(enrollment.detectors, measured, channel_ok, attack))

            if was_live and authority.state.terminated:
                msg = make_message(MessageKind.TERMINATE, GATEWAY, device_id, {"reason": "TrustBelowThreshold"}, costs)
                messages.append(msg)
                if live.adversary is not None:
                    live.adversary.observe([msg])
                live.gateway.go(GatewayState.TERMINATED)
                live.device.go(DeviceState.TERMINATED)
                outcome = SessionTerminated()
                logger.info("%s terminated at slot %d", session.session_id, s)

        live.trust = authority.state
        total = session.total_cost + sum(m.abstract_cost for m in messages) + compute
        if self.record_wall_time:
            wall = session.wall_time_s + (time.perf_counter() - t0)
        else:
            wall = total * costs.seconds_per_unit
        transcript = session.extended(tuple(messages), compute, outcome, wall)
        return AccessResult(transcript, {ledger.label: list(ledger.trajectory) for ledger in ledgers})


# -- scheme comparison ----------------------------------------------------


def scheme_properties(transcript: SessionTranscript) -> Dict[str, str]:
    """Scheme properties as they show up in a session's message flow."""

    def valid(flag: bool) -> str:
        return "Valid" if flag else "Non-valid"

    return {
        "characteristic": transcript.scheme,
        "key_transmission": valid(transcript.count(MessageKind.KEY_TRANSMISSION) > 0),
        "channel_probing": valid(transcript.count(MessageKind.PROBE_REQUEST) > 0),
        "quantization": valid(transcript.count(MessageKind.MODEL_TRANSFER) > 0),
        "data_verification": valid(transcript.count(MessageKind.VERIFY_TAG) > 0),
        "privacy_amplification": valid(bool(transcript.diagnostics.get("privacy_amplification"))),
    }


# -- fleet cost ------------------------------------------------------------


class Scheme(str, Enum):
    PROPOSED = "Proposed"
    PUF_BASELINE = "PufBaseline"


@dataclass(frozen=True)
class FleetCost:
    scheme: Scheme
    n_devices: int
    total_cost: int
    wall_time_s: float

    def row(self) -> Dict[str, object]:
        return {
            "scheme": self.scheme.value,
            "n_devices": self.n_devices,
            "total_cost": self.total_cost,
            "wall_time_s": self.wall_time_s,
        }


def fleet_cost(
    n_devices: int,
    scheme: Scheme,
    *,
    cfg: ChannelConfig | None = None,
    params: ProtocolParams | None = None,
    cost_model: CostModel | None = None,
    puf_params: PufParams | None = None,
    rng: RngStream | None = None,
    record_wall_time: bool = False,
) -> FleetCost:
    """Total cost of authenticating every device of a fleet once."""
    if n_devices < 1:
        raise ParameterDomain(f"n_devices must be >= 1 (got {n_devices})")
    scheme = Scheme(scheme)
    cfg = cfg or ChannelConfig()
    costs = cost_model or CostModel()
    puf_params = puf_params or PufParams()
    rng = (rng or RngStream(0)).child(f"fleet/{scheme.value}/{n_devices}")

    total = 0
    wall = 0.0
    if scheme is Scheme.PROPOSED:
        engine = ProtocolEngine(params, None, costs, record_wall_time=record_wall_time)
        for i in range(n_devices):
            device_id = f"fleet-{i:04d}"
            t = engine.run_session(device_id, cfg, rng=rng.child(device_id))
            total += t.total_cost
            wall += t.wall_time_s
    else:
        for i in range(n_devices):
            device_id = f"fleet-{i:04d}"
            t = run_puf_baseline(
                device_id,
                n_devices,
                puf_params.crp_table_size,
                puf_params.noise_bits,
                rng.child(device_id),
                params=puf_params,
                cost_model=costs,
                record_wall_time=record_wall_time,
            )
            total += t.total_cost
            wall += t.wall_time_s
    logger.info("fleet %s n=%d total_cost=%d", scheme.value, n_devices, total)
    return FleetCost(scheme, n_devices, total, wall)
