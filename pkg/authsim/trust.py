"""
Outlier-driven trust management and tiered authorization.

A transmitter starts from a trust value chosen by its primary attribute
(allowlisted IP or not). Every observation moves the value: outliers pull it
down fast, inliers raise it slowly, and falling under ``terminate_below``
ends the connection for good. The value maps onto ``len(level_thresholds)+1``
authorization levels (Level 1 null, Level 2 limited, Level 3 all resources
under the default policy).

Outliers come from one-class SVM detectors trained per attribute at
enrollment, OR-combined with the attacking-behaviour flag.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from enum import Enum
from typing import Dict, List, Mapping, Optional, Sequence, Tuple, Union

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, model_validator

from .channel import AttributeVector
from .errors import AlreadyTerminated, DimensionMismatch, ParameterDomain
from .svm import Kernel, OneClassModel, decision, train_one_class

logger = logging.getLogger(__name__)

DETECTOR_ATTRIBUTES = ("rssi", "cfo")
ATTACK_ATTRIBUTE = "attack"
KNOWN_ATTRIBUTES = DETECTOR_ATTRIBUTES + (ATTACK_ATTRIBUTE,)
TRUST_DIGITS = 12


class TrustPolicy(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)

    init_known: float = Field(0.9, ge=0.0, le=1.0)
    init_unknown: float = Field(0.5, ge=0.0, le=1.0)
    delta_up: float = Field(0.05, gt=0.0)
    delta_down: float = Field(0.2, gt=0.0)
    level_thresholds: Tuple[float, ...] = (0.5, 0.8)
    terminate_below: float = Field(0.2, ge=0.0)

    @model_validator(mode="after")
    def _check_levels(self) -> "TrustPolicy":
        th = self.level_thresholds
        if not th:
            raise ValueError("level_thresholds must not be empty")
        if any(not (0.0 < t < 1.0) for t in th):
            raise ValueError("level_thresholds must lie in (0, 1)")
        if any(b <= a for a, b in zip(th, th[1:])):
            raise ValueError("level_thresholds must be strictly ascending")
        if not self.terminate_below < th[0]:
            raise ValueError("terminate_below must be below the lowest level threshold")
        return self

    @property
    def n_levels(self) -> int:
        return len(self.level_thresholds) + 1


class PrimaryAttribute(str, Enum):
    KNOWN_IP = "KnownIp"
    UNKNOWN_IP = "UnknownIp"


class Observation(str, Enum):
    INLIER = "Inlier"
    OUTLIER = "Outlier"


@dataclass(frozen=True)
class TrustState:
    value: float
    observations: int = 0
    terminated: bool = False


@dataclass(frozen=True)
class AuthLevel:
    level: int

    def __post_init__(self) -> None:
        if self.level < 1:
            raise ParameterDomain(f"level must be >= 1 (got {self.level})")


@dataclass(frozen=True)
class Terminated:
    """Authorization result for a terminated transmitter."""


TERMINATED = Terminated()


def init_trust(primary: PrimaryAttribute, policy: TrustPolicy | None = None) -> TrustState:
    policy = policy or TrustPolicy()
    value = policy.init_known if PrimaryAttribute(primary) is PrimaryAttribute.KNOWN_IP else policy.init_unknown
    return TrustState(value=float(value))


def update(state: TrustState, observation: Observation, policy: TrustPolicy | None = None) -> TrustState:
    policy = policy or TrustPolicy()
    if state.terminated:
        raise AlreadyTerminated("Trust state is terminated; no further updates")
    if Observation(observation) is Observation.OUTLIER:
        value = max(0.0, state.value - policy.delta_down)
    else:
        value = min(1.0, state.value + policy.delta_up)
    # snap to the policy grid so 0.9 - 0.2 - 0.2 is 0.5, not 0.49999999999999994
    value = round(value, TRUST_DIGITS)
    return TrustState(
        value=value,
        observations=state.observations + 1,
        terminated=value < policy.terminate_below,
    )


def authorize(state: TrustState, policy: TrustPolicy | None = None) -> Union[AuthLevel, Terminated]:
    """Level is 1 + the number of thresholds at or below the value."""
    policy = policy or TrustPolicy()
    if state.terminated:
        return TERMINATED
    return AuthLevel(1 + sum(1 for t in policy.level_thresholds if t <= state.value))


def effective_value(state: TrustState) -> float:
    return 0.0 if state.terminated else state.value


def level_number(result: Union[AuthLevel, Terminated]) -> int:
    """Integer level for tabular output; 0 stands for terminated."""
    return result.level if isinstance(result, AuthLevel) else 0


@dataclass(frozen=True)
class AttributeModel:
    """One-class detector for a single attribute.

    For ``cfo`` the detector sees the residual after the enrolled
    offset+drift line, so hardware drift alone is not an anomaly.
    """

    name: str
    model: OneClassModel
    trend: Optional[Tuple[float, float]] = None  # (slope, intercept) over round index
    threshold: float = 0.0

    def feature(self, measurement: AttributeVector) -> float:
        if self.name == "rssi":
            return measurement.rssi
        if self.name == "cfo":
            v = measurement.cfo
            if self.trend is not None:
                slope, intercept = self.trend
                v -= slope * measurement.round_index + intercept
            return v
        raise DimensionMismatch(f"No detector feature for attribute {self.name!r}")

    def is_outlier(self, measurement: AttributeVector) -> bool:
        return decision(self.model, [self.feature(measurement)]) < self.threshold


def enroll_detectors(
    samples: Sequence[AttributeVector],
    nu: float = 0.05,
    kernel: Kernel = Kernel("rbf", 1.0),
    attributes: Sequence[str] = DETECTOR_ATTRIBUTES,
    quantile: Optional[float] = None,
) -> Dict[str, AttributeModel]:
    """Train one detector per attribute on enrollment measurements.

    With ``quantile`` set, the outlier threshold moves from the SVM boundary
    (decision 0) down to that quantile of the enrollment decisions when it is
    lower, so a legitimate stream is flagged at about that rate.
    """
    if quantile is not None and not (0.0 <= quantile < 1.0):
        raise ParameterDomain(f"quantile must be in [0, 1) (got {quantile})")
    detectors: Dict[str, AttributeModel] = {}
    rounds = np.array([s.round_index for s in samples], dtype=np.float64)
    for name in attributes:
        if name == "rssi":
            values = np.array([s.rssi for s in samples])
            trend = None
        elif name == "cfo":
            values = np.array([s.cfo for s in samples])
            slope, intercept = np.polyfit(rounds, values, 1)
            trend = (float(slope), float(intercept))
            values = values - (slope * rounds + intercept)
        else:
            raise ParameterDomain(f"No detector for attribute {name!r}")
        model = train_one_class(values.reshape(-1, 1), kernel, nu)
        threshold = 0.0
        if quantile is not None:
            scores = model.decision_many(values.reshape(-1, 1))
            threshold = min(0.0, float(np.quantile(scores, quantile)))
        detectors[name] = AttributeModel(name=name, model=model, trend=trend, threshold=threshold)
        logger.debug("detector %s: sv=%d threshold=%.4g", name, model.n_support, threshold)
    return detectors


def multi_attribute_observe(
    gateway_models: Sequence[AttributeModel],
    measurement: AttributeVector,
    attack_flag: bool = False,
) -> Observation:
    """Outlier if any detector flags the measurement or the attack flag is set."""
    if not gateway_models:
        raise ParameterDomain("multi_attribute_observe needs at least one attribute model")
    if attack_flag:
        return Observation.OUTLIER
    for m in gateway_models:
        if m.model.n_features != 1:
            raise DimensionMismatch(f"Detector {m.name!r} expects {m.model.n_features} features, not 1")
        if m.is_outlier(measurement):
            return Observation.OUTLIER
    return Observation.INLIER


@dataclass(frozen=True)
class TrajectoryPoint:
    step: int
    value: float
    level: int


@dataclass
class TrustLedger:
    """Trust state of one transmitter under one attribute set."""

    attributes: Tuple[str, ...]
    policy: TrustPolicy
    state: TrustState
    trajectory: List[TrajectoryPoint]

    @classmethod
    def start(cls, attributes: Sequence[str], policy: TrustPolicy, state: TrustState) -> "TrustLedger":
        return cls(tuple(attributes), policy, state, [])

    @property
    def label(self) -> str:
        return "+".join(self.attributes)

    def observe(
        self,
        detectors: Mapping[str, AttributeModel],
        measurement: AttributeVector,
        channel_ok: bool,
        attack_flag: bool,
    ) -> Observation:
        """Channel mismatch, or ``multi_attribute_observe`` over this set's detectors."""
        if not channel_ok:
            return Observation.OUTLIER
        models = [detectors[a] for a in self.attributes if a in DETECTOR_ATTRIBUTES]
        attack = attack_flag and ATTACK_ATTRIBUTE in self.attributes
        if not models:
            return Observation.OUTLIER if attack else Observation.INLIER
        return multi_attribute_observe(models, measurement, attack)

    def step(self, step: int, observation: Optional[Observation]) -> None:
        """Apply one slot; ``None`` or a terminated state just records the hold."""
        if observation is not None and not self.state.terminated:
            self.state = update(self.state, observation, self.policy)
            if self.state.terminated:
                logger.info("trust[%s] terminated at step %d", self.label, step)
        self.trajectory.append(
            TrajectoryPoint(
                step=step,
                value=effective_value(self.state),
                level=level_number(authorize(self.state, self.policy)),
            )
        )
