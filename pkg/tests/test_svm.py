import numpy as np
import pytest
from scipy.optimize import minimize

from authsim.errors import DimensionMismatch, IterationLimit, ParameterDomain, SingleClassError
from authsim.svm import (
    Kernel,
    OneClassModel,
    SvmModel,
    classify,
    decision,
    kkt_residuals,
    train_binary,
    train_one_class,
)

TWO_POINTS = [[0.0, 0.0], [1.0, 1.0]]


def _two_point_model(labels=(-1, 1)) -> SvmModel:
    return train_binary(TWO_POINTS, list(labels), Kernel("linear"), C=10.0, standardize=False)


def _blobs(seed: int = 0, n: int = 40):
    rng = np.random.default_rng(seed)
    a = rng.normal(loc=(-2.0, -2.0), scale=0.6, size=(n, 2))
    b = rng.normal(loc=(2.0, 2.0), scale=0.6, size=(n, 2))
    x = np.vstack([a, b])
    y = np.array([-1] * n + [1] * n)
    return x, y


def _separable_set(seed: int, n: int = 12, gap: float = 0.3):
    rng = np.random.default_rng(seed)
    theta = rng.uniform(0, 2 * np.pi)
    w_true = np.array([np.cos(theta), np.sin(theta)])
    while True:
        pts = []
        while len(pts) < n:
            p = rng.uniform(-1.0, 1.0, size=2)
            if abs(p @ w_true) >= gap:
                pts.append(p)
        x = np.array(pts)
        y = np.where(x @ w_true > 0, 1, -1)
        if 0 < (y > 0).sum() < n:
            return x, y


def _hard_margin_oracle(x: np.ndarray, y: np.ndarray):
    """Primal max-margin QP: min |w|^2/2 s.t. y_i (w.x_i + b) >= 1."""
    cons = [{"type": "ineq", "fun": (lambda v, i=i: y[i] * (x[i] @ v[:2] + v[2]) - 1.0)} for i in range(len(y))]
    res = minimize(
        lambda v: 0.5 * float(v[:2] @ v[:2]),
        x0=np.zeros(3),
        constraints=cons,
        method="SLSQP",
        options={"ftol": 1e-12, "maxiter": 500},
    )
    assert res.success, res.message
    return res.x[:2], res.x[2]


def test_two_point_closed_form():
    model = _two_point_model()
    assert decision(model, [1.0, 1.0]) == pytest.approx(1.0, abs=1e-3)
    assert decision(model, [0.0, 0.0]) == pytest.approx(-1.0, abs=1e-3)
    assert decision(model, [0.5, 0.5]) == pytest.approx(0.0, abs=1e-3)
    for x in [(2.0, -1.0), (0.25, 0.0), (-3.0, 5.0), (0.7, 0.1)]:
        assert decision(model, list(x)) == pytest.approx(x[0] + x[1] - 1.0, abs=1e-3)


def test_label_flip_negates_decision():
    model = _two_point_model()
    flipped = _two_point_model(labels=(1, -1))
    for x in [(0.0, 0.0), (1.0, 1.0), (0.3, 0.9), (2.0, -1.0)]:
        assert decision(flipped, list(x)) == pytest.approx(-decision(model, list(x)), abs=1e-3)


def test_support_vectors_sit_on_margin():
    model = _two_point_model()
    for sv in TWO_POINTS:
        assert abs(decision(model, sv)) >= 1.0 - 1e-3


def test_single_class_rejected():
    with pytest.raises(SingleClassError):
        train_binary(TWO_POINTS, [1, 1], Kernel("linear"))


def test_bad_training_inputs():
    with pytest.raises(DimensionMismatch):
        train_binary(TWO_POINTS, [1, -1, 1], Kernel("linear"))
    with pytest.raises(ParameterDomain):
        train_binary(TWO_POINTS, [0, 1], Kernel("linear"))
    with pytest.raises(ParameterDomain):
        train_binary(TWO_POINTS, [-1, 1], Kernel("linear"), C=0.0)
    with pytest.raises(ParameterDomain):
        Kernel("poly")


def test_decision_dimension_mismatch():
    model = _two_point_model()
    with pytest.raises(DimensionMismatch):
        decision(model, [1.0, 2.0, 3.0])


def test_classify_tie_breaks_to_positive():
    payload = {
        "model": "binary",
        "kernel": {"kind": "linear", "gamma": None},
        "support_vectors": [[1.0]],
        "dual_coefs": [0.0],
        "bias": 0.0,
        "standardization": {"mean": [0.0], "scale": [1.0]},
        "C": 1.0,
    }
    model = SvmModel.from_payload(payload)
    assert decision(model, [3.0]) == 0.0
    assert classify(model, [3.0]) == 1
    two = _two_point_model()
    assert classify(two, [1.0, 1.0]) == 1
    assert classify(two, [0.0, 0.0]) == -1


@pytest.mark.parametrize("seed", range(20))
def test_agrees_with_max_margin_oracle(seed: int):
    x, y = _separable_set(seed)
    model = train_binary(x, y, Kernel("linear"), C=1e3, tol=1e-6, standardize=False)
    w, b = _hard_margin_oracle(x, y)

    g = np.linspace(-1.0, 1.0, 10)
    grid = np.array([(u, v) for u in g for v in g])
    smo = model.decision_many(grid)
    oracle = grid @ w + b
    assert np.max(np.abs(smo - oracle)) < 0.05
    clear = np.abs(oracle) > 1e-2
    assert np.array_equal(np.sign(smo[clear]), np.sign(oracle[clear]))


def test_kkt_residuals_within_tolerance():
    x, y = _blobs(1)
    tol = 1e-3
    model = train_binary(x, y, Kernel("rbf"), C=1.0, tol=tol)
    assert np.max(kkt_residuals(model, x, y)) <= tol + 1e-12


@pytest.mark.parametrize("seed", range(20))
def test_kkt_residuals_within_tolerance_on_separable_sets(seed: int):
    x, y = _separable_set(seed)
    tol = 1e-3
    model = train_binary(x, y, Kernel("linear"), C=1e3, tol=tol, standardize=False)
    assert np.max(kkt_residuals(model, x, y)) <= tol + 1e-12


def test_rbf_separates_blobs():
    x, y = _blobs(2)
    model = train_binary(x, y, Kernel("rbf"), C=1.0)
    predicted = np.array([classify(model, row) for row in x])
    assert np.mean(predicted == y) >= 0.95


def test_standardization_makes_classifier_affine_invariant():
    x, y = _blobs(3)
    scale = np.array([1000.0, 0.01])
    shift = np.array([-60.0, 1500.0])
    m1 = train_binary(x, y, Kernel("rbf"), C=1.0)
    m2 = train_binary(x * scale + shift, y, Kernel("rbf"), C=1.0)
    g = np.linspace(-3.0, 3.0, 12)
    grid = np.array([(u, v) for u in g for v in g])
    d1 = m1.decision_many(grid)
    d2 = m2.decision_many(grid * scale + shift)
    clear = np.abs(d1) > 0.1
    assert clear.sum() > 20
    assert np.array_equal(np.sign(d1[clear]), np.sign(d2[clear]))


def test_training_is_deterministic_and_payload_round_trips():
    x, y = _blobs(4)
    m1 = train_binary(x, y, Kernel("rbf"), C=1.0)
    m2 = train_binary(x, y, Kernel("rbf"), C=1.0)
    assert m1 == m2
    restored = SvmModel.from_payload(m1.to_payload())
    assert restored == m1
    assert np.array_equal(restored.decision_many(x), m1.decision_many(x))


def test_model_arrays_are_read_only():
    model = _two_point_model()
    with pytest.raises(ValueError):
        model.support_vectors[0, 0] = 5.0


def test_iteration_limit():
    x, y = _blobs(5)
    with pytest.raises(IterationLimit):
        train_binary(x, y, Kernel("rbf"), C=1.0, max_iter=1)


def test_one_class_outlier_fraction_tracks_nu():
    rng = np.random.default_rng(7)
    x = rng.uniform(0.0, 1.0, size=(200, 2))
    model = train_one_class(x, Kernel("rbf", 1.0), nu=0.5)
    values = model.decision_many(x)
    assert 0.4 <= float(np.mean(values < 0.0)) <= 0.6
    assert decision(model, [100.0, 100.0]) < 0.0


def test_one_class_payload_keeps_kind():
    rng = np.random.default_rng(8)
    model = train_one_class(rng.normal(size=(50, 1)), Kernel("rbf", 1.0), nu=0.1)
    restored = SvmModel.from_payload(model.to_payload())
    assert isinstance(restored, OneClassModel)
    assert restored.nu == pytest.approx(0.1)
    assert restored == model


def test_one_class_domain():
    with pytest.raises(ParameterDomain):
        train_one_class([[0.0], [1.0]], nu=0.0)
    with pytest.raises(ParameterDomain):
        train_one_class([[0.0], [1.0]], nu=1.5)
    with pytest.raises(ParameterDomain):
        train_one_class([[0.0]], nu=0.5)


@pytest.mark.parametrize("nu", [0.05, 0.1])
def test_one_class_outlier_fraction_bounded_by_small_nu(nu: float):
    x = np.random.default_rng(11).standard_normal((256, 1))
    model = train_one_class(x, Kernel("rbf", 1.0), nu=nu)
    values = model.decision_many(x)
    assert int(np.count_nonzero(values < 0.0)) <= int(np.floor(nu * 256))
    assert float(np.mean(values < 0.0)) <= nu + 0.1
    assert decision(model, [50.0]) < 0.0
