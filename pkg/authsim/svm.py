"""
Kernel SVM trained with sequential minimal optimization.

Both the binary classifier (the quantizer boundary the gateway ships to the
sensor) and the one-class outlier detectors are solved by the same SMO core
over the dual

    min 1/2 a'Qa + p'a   s.t.   0 <= a_i <= C,   y'a = const,

with maximal-violating-pair working-set selection. Binary: Q = yy'*K,
p = -1. One-class (nu formulation): y = +1, p = 0, sum(a) = nu*n, C = 1,
rescaled by 1/(nu*n) afterwards.

Feature standardization is part of the model so a shipped model is
self-contained.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Any, Dict, Optional, Sequence, Tuple

import numpy as np

from .errors import DimensionMismatch, IterationLimit, ParameterDomain, SingleClassError

logger = logging.getLogger(__name__)

MAX_ITER = 10_000
TAU = 1e-12


@dataclass(frozen=True)
class Kernel:
    """Kernel family. ``gamma=None`` means "pick from the data" at training."""

    kind: str = "rbf"
    gamma: Optional[float] = None

    def __post_init__(self) -> None:
        if self.kind not in ("linear", "rbf"):
            raise ParameterDomain(f"Unknown kernel kind {self.kind!r} (expected 'linear' or 'rbf')")
        if self.kind == "rbf" and self.gamma is not None and not self.gamma > 0:
            raise ParameterDomain(f"rbf gamma must be > 0 (got {self.gamma})")

    def matrix(self, a: np.ndarray, b: np.ndarray) -> np.ndarray:
        if self.kind == "linear":
            return a @ b.T
        if self.gamma is None:
            raise ParameterDomain("rbf kernel gamma is unresolved")
        sq = (
            np.sum(a * a, axis=1)[:, None]
            + np.sum(b * b, axis=1)[None, :]
            - 2.0 * (a @ b.T)
        )
        np.maximum(sq, 0.0, out=sq)
        return np.exp(-self.gamma * sq)

    def resolved(self, xs: np.ndarray) -> "Kernel":
        if self.kind == "linear" or self.gamma is not None:
            return self
        var = float(xs.var())
        gamma = 1.0 / (xs.shape[1] * var) if var > 0 else 1.0
        return Kernel("rbf", gamma)


@dataclass(frozen=True, eq=False)
class SvmModel:
    support_vectors: np.ndarray
    dual_coefs: np.ndarray
    bias: float
    kernel: Kernel
    mean: np.ndarray
    scale: np.ndarray
    C: float
    support_indices: Tuple[int, ...] = field(default=(), repr=False)
    n_iter: int = field(default=0, repr=False)

    @property
    def n_features(self) -> int:
        return int(self.support_vectors.shape[1])

    @property
    def n_support(self) -> int:
        return int(self.dual_coefs.shape[0])

    @property
    def feature_standardization(self) -> Tuple[Tuple[float, float], ...]:
        return tuple((float(m), float(s)) for m, s in zip(self.mean, self.scale))

    def standardize(self, x: np.ndarray) -> np.ndarray:
        return (x - self.mean) / self.scale

    def decision_many(self, xs: Sequence[Sequence[float]] | np.ndarray) -> np.ndarray:
        arr = _as_matrix(xs)
        if arr.shape[1] != self.n_features:
            raise DimensionMismatch(
                f"Query has {arr.shape[1]} features; model expects {self.n_features}"
            )
        k = self.kernel.matrix(self.standardize(arr), self.support_vectors)
        return k @ self.dual_coefs + self.bias

    def to_payload(self) -> Dict[str, Any]:
        return {
            "model": "binary",
            "kernel": {"kind": self.kernel.kind, "gamma": self.kernel.gamma},
            "support_vectors": self.support_vectors.tolist(),
            "dual_coefs": self.dual_coefs.tolist(),
            "bias": float(self.bias),
            "standardization": {"mean": self.mean.tolist(), "scale": self.scale.tolist()},
            "C": float(self.C),
        }

    @classmethod
    def from_payload(cls, payload: Dict[str, Any]) -> "SvmModel":
        kw = _common_from_payload(payload)
        if payload.get("model") == "one_class":
            return OneClassModel(**kw, nu=float(payload["nu"]))
        return cls(**kw)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, SvmModel):
            return NotImplemented
        return type(self) is type(other) and self.to_payload() == other.to_payload()

    __hash__ = None  # type: ignore[assignment]


@dataclass(frozen=True, eq=False)
class OneClassModel(SvmModel):
    nu: float = 0.5

    def to_payload(self) -> Dict[str, Any]:
        payload = super().to_payload()
        payload["model"] = "one_class"
        payload["nu"] = float(self.nu)
        return payload


def _common_from_payload(payload: Dict[str, Any]) -> Dict[str, Any]:
    kern = payload["kernel"]
    std = payload["standardization"]
    return dict(
        support_vectors=_frozen(np.asarray(payload["support_vectors"], dtype=np.float64)),
        dual_coefs=_frozen(np.asarray(payload["dual_coefs"], dtype=np.float64)),
        bias=float(payload["bias"]),
        kernel=Kernel(kern["kind"], kern.get("gamma")),
        mean=_frozen(np.asarray(std["mean"], dtype=np.float64)),
        scale=_frozen(np.asarray(std["scale"], dtype=np.float64)),
        C=float(payload["C"]),
    )


def _frozen(arr: np.ndarray) -> np.ndarray:
    arr = np.array(arr, dtype=np.float64, copy=True)
    arr.flags.writeable = False
    return arr


def _as_matrix(samples: Sequence[Sequence[float]] | np.ndarray) -> np.ndarray:
    try:
        arr = np.asarray(samples, dtype=np.float64)
    except ValueError as exc:
        raise DimensionMismatch(f"Ragged feature vectors: {exc}") from exc
    if arr.ndim == 1:
        arr = arr.reshape(1, -1)
    if arr.ndim != 2 or arr.shape[0] == 0 or arr.shape[1] == 0:
        raise DimensionMismatch(f"Expected a non-empty 2-D sample matrix, got shape {arr.shape}")
    return arr


def _standardization(x: np.ndarray, enabled: bool) -> Tuple[np.ndarray, np.ndarray]:
    if not enabled:
        return np.zeros(x.shape[1]), np.ones(x.shape[1])
    mean = x.mean(axis=0)
    scale = x.std(axis=0)
    scale = np.where(scale > 0, scale, 1.0)
    return mean, scale


def _smo(
    kmat: np.ndarray,
    y: np.ndarray,
    p: np.ndarray,
    c: float,
    tol: float,
    alpha: np.ndarray,
    max_iter: int,
) -> Tuple[np.ndarray, float, int]:
    """Solve the dual in place; returns ``(alpha, rho, iterations)``."""
    grad = y * (kmat @ (alpha * y)) + p
    for it in range(max_iter):
        v = -y * grad
        up = ((y > 0) & (alpha < c)) | ((y < 0) & (alpha > 0))
        low = ((y > 0) & (alpha > 0)) | ((y < 0) & (alpha < c))
        if not up.any() or not low.any():
            break
        v_up = np.where(up, v, -np.inf)
        v_low = np.where(low, v, np.inf)
        i = int(np.argmax(v_up))
        j = int(np.argmin(v_low))
        gap = float(v_up[i] - v_low[j])
        if gap <= tol:
            break

        eta = float(kmat[i, i] + kmat[j, j] - 2.0 * kmat[i, j])
        if eta <= 0:
            eta = TAU
        room_i = c - alpha[i] if y[i] > 0 else alpha[i]
        room_j = alpha[j] if y[j] > 0 else c - alpha[j]
        lam = min(float(room_i), float(room_j), gap / eta)

        alpha[i] += y[i] * lam
        alpha[j] -= y[j] * lam
        # pin to the box exactly so a hit bound leaves the working set
        if lam == room_i:
            alpha[i] = c if y[i] > 0 else 0.0
        if lam == room_j:
            alpha[j] = 0.0 if y[j] > 0 else c
        grad += y * lam * (kmat[:, i] - kmat[:, j])
    else:
        raise IterationLimit(f"SMO did not converge within {max_iter} iterations")

    return alpha, _rho(alpha, y, grad, c), it


def _rho(alpha: np.ndarray, y: np.ndarray, grad: np.ndarray, c: float) -> float:
    yg = y * grad
    at_upper = alpha >= c
    at_lower = alpha <= 0
    free = ~(at_upper | at_lower)
    if free.any():
        return float(yg[free].mean())
    ub_mask = (at_upper & (y < 0)) | (at_lower & (y > 0))
    lb_mask = (at_upper & (y > 0)) | (at_lower & (y < 0))
    ub = float(yg[ub_mask].min()) if ub_mask.any() else math.inf
    lb = float(yg[lb_mask].max()) if lb_mask.any() else -math.inf
    if math.isinf(ub):
        return lb
    if math.isinf(lb):
        return ub
    return 0.5 * (ub + lb)


def _nu_offset(scores: np.ndarray, rho: float, nu: float) -> float:
    """Lower ``rho`` until at most ``floor(nu*n)`` training scores fall below it.

    The exact optimum already satisfies this; an SMO stop within ``tol``
    leaves free support vectors scattered just under the boundary.
    """
    k = int(math.floor(nu * scores.size + 1e-9))
    if int(np.count_nonzero(scores < rho)) <= k:
        return rho
    edge = float(np.sort(scores)[min(k, scores.size - 1)])
    return edge - 1e-12 * max(1.0, abs(edge))


def _prepare(samples, kernel: Kernel, standardize: bool):
    x = _as_matrix(samples)
    mean, scale = _standardization(x, standardize)
    xs = (x - mean) / scale
    kern = kernel.resolved(xs)
    return xs, kern, mean, scale


def train_binary(
    samples: Sequence[Sequence[float]] | np.ndarray,
    labels: Sequence[int],
    kernel: Kernel = Kernel(),
    C: float = 1.0,
    tol: float = 1e-3,
    *,
    standardize: bool = True,
    max_iter: int = MAX_ITER,
) -> SvmModel:
    """Train a soft-margin binary SVM; decision f(x) = sum a_i y_i K(sv_i, x) + b."""
    if not C > 0:
        raise ParameterDomain(f"C must be > 0 (got {C})")
    if not tol > 0:
        raise ParameterDomain(f"tol must be > 0 (got {tol})")
    xs, kern, mean, scale = _prepare(samples, kernel, standardize)
    y = np.asarray(labels, dtype=np.float64)
    if y.shape != (xs.shape[0],):
        raise DimensionMismatch(f"{xs.shape[0]} samples but {y.size} labels")
    if not np.all((y == 1.0) | (y == -1.0)):
        raise ParameterDomain("labels must be -1 or +1")
    if np.all(y == y[0]):
        raise SingleClassError(f"All {y.size} labels are {int(y[0]):+d}; need both classes")

    kmat = kern.matrix(xs, xs)
    alpha, rho, n_iter = _smo(kmat, y, -np.ones_like(y), float(C), float(tol), np.zeros_like(y), max_iter)
    sv = np.flatnonzero(alpha > 0)
    logger.debug("binary SMO: n=%d sv=%d iters=%d", y.size, sv.size, n_iter)
    return SvmModel(
        support_vectors=_frozen(xs[sv]),
        dual_coefs=_frozen(alpha[sv] * y[sv]),
        bias=-rho,
        kernel=kern,
        mean=_frozen(mean),
        scale=_frozen(scale),
        C=float(C),
        support_indices=tuple(int(i) for i in sv),
        n_iter=n_iter,
    )


def train_one_class(
    samples: Sequence[Sequence[float]] | np.ndarray,
    kernel: Kernel = Kernel(),
    nu: float = 0.5,
    tol: float = 1e-3,
    *,
    standardize: bool = True,
    max_iter: int = MAX_ITER,
) -> OneClassModel:
    """Train a nu one-class SVM; decision >= 0 means inlier."""
    if not (0.0 < nu <= 1.0):
        raise ParameterDomain(f"nu must be in (0, 1] (got {nu})")
    if not tol > 0:
        raise ParameterDomain(f"tol must be > 0 (got {tol})")
    xs, kern, mean, scale = _prepare(samples, kernel, standardize)
    n = xs.shape[0]
    if n < 2:
        raise ParameterDomain(f"one-class training needs >= 2 samples (got {n})")

    total = nu * n
    alpha = np.zeros(n)
    n_full = min(int(total), n)
    alpha[:n_full] = 1.0
    if n_full < n:
        alpha[n_full] = total - n_full
    y = np.ones(n)

    kmat = kern.matrix(xs, xs)
    alpha, rho, n_iter = _smo(kmat, y, np.zeros(n), 1.0, float(tol), alpha, max_iter)
    rho = _nu_offset(kmat @ alpha, rho, nu)
    sv = np.flatnonzero(alpha > 0)
    logger.debug("one-class SMO: n=%d nu=%.3f sv=%d iters=%d", n, nu, sv.size, n_iter)
    return OneClassModel(
        support_vectors=_frozen(xs[sv]),
        dual_coefs=_frozen(alpha[sv] / total),
        bias=-rho / total,
        kernel=kern,
        mean=_frozen(mean),
        scale=_frozen(scale),
        C=1.0 / total,
        support_indices=tuple(int(i) for i in sv),
        n_iter=n_iter,
        nu=float(nu),
    )


def decision(model: SvmModel, x: Sequence[float]) -> float:
    arr = np.asarray(x, dtype=np.float64)
    if arr.ndim != 1:
        raise DimensionMismatch(f"Expected one feature vector, got shape {arr.shape}")
    return float(model.decision_many(arr.reshape(1, -1))[0])


def classify(model: SvmModel, x: Sequence[float]) -> int:
    """Sign of the decision value; a value of exactly 0 maps to +1."""
    return 1 if decision(model, x) >= 0.0 else -1


def kkt_residuals(
    model: SvmModel,
    samples: Sequence[Sequence[float]] | np.ndarray,
    labels: Sequence[int],
) -> np.ndarray:
    """Per-sample KKT violation of a binary model against its training set."""
    y = np.asarray(labels, dtype=np.float64)
    alpha = np.zeros(y.size)
    for idx, coef in zip(model.support_indices, model.dual_coefs):
        alpha[idx] = abs(float(coef))
    margin = y * model.decision_many(samples)
    at_lower = alpha <= 0
    at_upper = alpha >= model.C
    free = ~(at_lower | at_upper)
    res = np.zeros(y.size)
    res[at_lower] = np.maximum(0.0, 1.0 - margin[at_lower])
    res[at_upper] = np.maximum(0.0, margin[at_upper] - 1.0)
    res[free] = np.abs(margin[free] - 1.0)
    return res
