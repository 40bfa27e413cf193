"""
Guard-band quantization of channel attributes into bits.

The gateway labels its calibration rounds by a median split on RSSI, trains a
binary SVM on ``(rssi, cfo)`` and keeps only the rounds whose decision value
clears the guard band. The resulting :class:`QuantizerModel` (boundary +
guard + retained round indices) is what travels to the sensor; both sides
then read one bit per retained round from the sign of the decision value.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Any, Dict, Optional, Sequence, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, Field

from .channel import AttributeVector
from .errors import (
    DegenerateLabels,
    EmptyRetention,
    InsufficientData,
    MissingRound,
    ParameterDomain,
    RoundMismatch,
)
from .svm import Kernel, SvmModel, train_binary

logger = logging.getLogger(__name__)

MIN_CALIBRATION_ROUNDS = 16


class SvmParams(BaseModel):
    """Training knobs for the quantizer boundary."""

    model_config = ConfigDict(extra="forbid", frozen=True)

    kernel: str = Field("rbf", pattern="^(linear|rbf)$")
    gamma: Optional[float] = Field(None, gt=0.0, description="rbf width; null = 1/(d*var) of standardized data")
    C: float = Field(0.01, gt=0.0)
    tol: float = Field(1e-3, gt=0.0)

    def kernel_spec(self) -> Kernel:
        return Kernel(self.kernel, self.gamma)


@dataclass(frozen=True)
class QuantizerModel:
    svm: SvmModel
    guard: float
    retained_rounds: Tuple[int, ...]

    def to_payload(self) -> Dict[str, Any]:
        return {
            "svm": self.svm.to_payload(),
            "guard": float(self.guard),
            "retained_rounds": list(self.retained_rounds),
        }

    @classmethod
    def from_payload(cls, payload: Dict[str, Any]) -> "QuantizerModel":
        return cls(
            svm=SvmModel.from_payload(payload["svm"]),
            guard=float(payload["guard"]),
            retained_rounds=tuple(int(r) for r in payload["retained_rounds"]),
        )


@dataclass(frozen=True)
class BitMaterial:
    """Quantized bits with the round each one came from.

    Endpoint-private: never placed in a protocol message.
    """

    bits: Tuple[int, ...]
    source_rounds: Tuple[int, ...]

    def __post_init__(self) -> None:
        if len(self.bits) != len(self.source_rounds):
            raise RoundMismatch(
                f"{len(self.bits)} bits but {len(self.source_rounds)} source rounds"
            )

    def __len__(self) -> int:
        return len(self.bits)

    def as_array(self) -> np.ndarray:
        return np.asarray(self.bits, dtype=np.uint8)


def _features(samples: Sequence[AttributeVector]) -> np.ndarray:
    return np.array([s.features() for s in samples], dtype=np.float64)


def median_split_labels(rssi: np.ndarray) -> np.ndarray:
    """+1 above the median, -1 at or below it."""
    return np.where(rssi > np.median(rssi), 1, -1)


def fit_quantizer(
    gateway_samples: Sequence[AttributeVector],
    guard: float,
    svm_params: SvmParams | None = None,
) -> QuantizerModel:
    if guard < 0:
        raise ParameterDomain(f"guard must be >= 0 (got {guard})")
    if len(gateway_samples) < MIN_CALIBRATION_ROUNDS:
        raise InsufficientData(
            f"Need >= {MIN_CALIBRATION_ROUNDS} calibration rounds (got {len(gateway_samples)})"
        )
    params = svm_params or SvmParams()
    x = _features(gateway_samples)
    labels = median_split_labels(x[:, 0])
    if np.all(labels == labels[0]):
        raise DegenerateLabels("Calibration RSSI has no spread; median split yields one class")

    svm = train_binary(x, labels, params.kernel_spec(), params.C, params.tol)
    values = svm.decision_many(x)
    rounds = np.array([s.round_index for s in gateway_samples])
    keep = np.abs(values) > guard
    if not keep.any():
        raise EmptyRetention(
            f"Guard {guard} exceeds every calibration decision magnitude (max {np.abs(values).max():.4g})"
        )
    retained = tuple(int(r) for r in rounds[keep])
    logger.debug(
        "quantizer: %d/%d rounds retained at guard %.3f, %d support vectors",
        len(retained),
        len(gateway_samples),
        guard,
        svm.n_support,
    )
    return QuantizerModel(svm=svm, guard=float(guard), retained_rounds=retained)


def quantize(model: QuantizerModel, samples: Sequence[AttributeVector]) -> BitMaterial:
    by_round = {s.round_index: s for s in samples}
    missing = [r for r in model.retained_rounds if r not in by_round]
    if missing:
        raise MissingRound(f"No sample for retained round(s) {missing[:5]}{'...' if len(missing) > 5 else ''}")
    x = _features([by_round[r] for r in model.retained_rounds])
    values = model.svm.decision_many(x)
    bits = tuple(1 if v > 0.0 else 0 for v in values)
    return BitMaterial(bits=bits, source_rounds=model.retained_rounds)


def bit_agreement(a: BitMaterial, b: BitMaterial) -> float:
    if a.source_rounds != b.source_rounds:
        raise RoundMismatch("BitMaterials cover different rounds")
    if not a.bits:
        raise RoundMismatch("BitMaterials are empty")
    return float(np.mean(a.as_array() == b.as_array()))
