from fractions import Fraction
from itertools import product

import numpy as np
import pytest
from pydantic import ValidationError

from authsim.channel import AttributeVector, ChannelConfig, probe_sequence
from authsim.errors import AlreadyTerminated, ParameterDomain
from authsim.rng import RngStream
from authsim.trust import (
    TERMINATED,
    AuthLevel,
    Observation,
    PrimaryAttribute,
    TrajectoryPoint,
    TrustLedger,
    TrustPolicy,
    TrustState,
    authorize,
    enroll_detectors,
    init_trust,
    multi_attribute_observe,
    update,
)

POLICY = TrustPolicy()


def test_initial_trust():
    assert init_trust(PrimaryAttribute.KNOWN_IP).value == pytest.approx(0.9)
    assert init_trust(PrimaryAttribute.UNKNOWN_IP).value == pytest.approx(0.5)
    assert init_trust(PrimaryAttribute.KNOWN_IP) == init_trust(PrimaryAttribute.KNOWN_IP)


def test_update_arithmetic_and_clamps():
    assert update(TrustState(0.9), Observation.OUTLIER).value == pytest.approx(0.7)
    assert update(TrustState(0.98), Observation.INLIER).value == 1.0

    low = update(TrustState(0.05), Observation.OUTLIER)
    assert low.value == 0.0
    assert low.terminated
    assert low.observations == 1


def test_known_device_terminates_on_fourth_consecutive_outlier():
    state = init_trust(PrimaryAttribute.KNOWN_IP)
    for _ in range(3):
        state = update(state, Observation.OUTLIER)
        assert not state.terminated
    state = update(state, Observation.OUTLIER)
    assert state.terminated
    assert state.value == pytest.approx(0.1)


def test_unknown_device_terminates_on_second_outlier():
    state = init_trust(PrimaryAttribute.UNKNOWN_IP)
    state = update(state, Observation.OUTLIER)
    assert not state.terminated
    state = update(state, Observation.OUTLIER)
    assert state.terminated


def test_terminated_state_is_final():
    with pytest.raises(AlreadyTerminated):
        update(TrustState(0.0, terminated=True), Observation.INLIER)


def test_values_stay_in_unit_interval():
    rng = np.random.default_rng(0)
    state = TrustState(0.5)
    for _ in range(500):
        if state.terminated:
            state = TrustState(float(rng.uniform()))
        obs = Observation.OUTLIER if rng.uniform() < 0.3 else Observation.INLIER
        state = update(state, obs)
        assert 0.0 <= state.value <= 1.0


def test_authorization_levels():
    assert authorize(TrustState(0.95)) == AuthLevel(3)
    assert authorize(TrustState(0.6)) == AuthLevel(2)
    assert authorize(TrustState(0.5)) == AuthLevel(2)
    assert authorize(TrustState(0.3)) == AuthLevel(1)
    assert authorize(TrustState(0.1, terminated=True)) is TERMINATED


def test_low_trust_never_reaches_level_two():
    previous = 0
    for i in range(101):
        value = i / 100
        level = authorize(TrustState(value)).level
        if value < 0.5:
            assert level == 1
        assert level >= previous
        previous = level


def test_policy_validation():
    with pytest.raises(ValidationError):
        TrustPolicy(level_thresholds=(0.8, 0.5))
    with pytest.raises(ValidationError):
        TrustPolicy(terminate_below=0.6)
    with pytest.raises(ValidationError):
        TrustPolicy(level_thresholds=())
    assert TrustPolicy(level_thresholds=(0.3, 0.6, 0.9), terminate_below=0.1).n_levels == 4


def _enrolled(n: int = 1000, seed: int = 5):
    cfg = ChannelConfig()
    gen = RngStream(seed, "enroll").generator()
    enroll = probe_sequence(cfg, n, gen)
    fresh = probe_sequence(cfg, n, gen, start_round=n, prev_latent=enroll.latent)
    return cfg, enroll_detectors(enroll.gateway, nu=0.1), fresh


def test_enrolled_distribution_reads_as_inlier():
    _, detectors, fresh = _enrolled()
    for name in ("rssi", "cfo"):
        inliers = sum(
            1 for g in fresh.gateway if multi_attribute_observe([detectors[name]], g) is Observation.INLIER
        )
        assert inliers / len(fresh.gateway) >= 1 - 0.1 - 0.1


def test_foreign_oscillator_is_an_outlier():
    cfg, detectors, _ = _enrolled(256)
    slope, intercept = detectors["cfo"].trend
    r = 300
    on_trend = AttributeVector(cfg.mu_rssi, slope * r + intercept, r)
    shifted = AttributeVector(cfg.mu_rssi, slope * r + intercept + 400.0, r)
    models = list(detectors.values())
    assert multi_attribute_observe(models, on_trend) is Observation.INLIER
    assert multi_attribute_observe(models, shifted) is Observation.OUTLIER
    assert multi_attribute_observe(models, on_trend, attack_flag=True) is Observation.OUTLIER


def test_observe_needs_models():
    with pytest.raises(ParameterDomain):
        multi_attribute_observe([], AttributeVector(-60.0, 1000.0, 0))


def test_ledger_routes_through_its_own_detectors():
    cfg, detectors, _ = _enrolled(256)
    slope, intercept = detectors["cfo"].trend
    r = 300
    clean = AttributeVector(cfg.mu_rssi, slope * r + intercept, r)
    foreign = AttributeVector(cfg.mu_rssi, slope * r + intercept + 400.0, r)

    ledger = TrustLedger.start(("rssi",), POLICY, TrustState(0.9))
    assert ledger.label == "rssi"
    assert ledger.observe(detectors, foreign, True, True) is Observation.INLIER
    assert ledger.observe(detectors, clean, False, False) is Observation.OUTLIER

    full = TrustLedger.start(("rssi", "cfo", "attack"), POLICY, TrustState(0.9))
    assert full.label == "rssi+cfo+attack"
    assert full.observe(detectors, clean, True, False) is Observation.INLIER
    assert full.observe(detectors, foreign, True, False) is Observation.OUTLIER
    assert full.observe(detectors, clean, True, True) is Observation.OUTLIER

    attack_only = TrustLedger.start(("attack",), POLICY, TrustState(0.9))
    assert attack_only.observe(detectors, foreign, True, False) is Observation.INLIER
    assert attack_only.observe(detectors, clean, True, True) is Observation.OUTLIER


def test_ledger_records_effective_trust():
    ledger = TrustLedger.start(("cfo",), POLICY, TrustState(0.5))
    ledger.step(1, Observation.OUTLIER)
    ledger.step(2, Observation.OUTLIER)
    ledger.step(3, Observation.INLIER)
    assert [p.step for p in ledger.trajectory] == [1, 2, 3]
    assert ledger.trajectory[0].value == pytest.approx(0.3)
    assert ledger.trajectory[0].level == 1
    assert ledger.trajectory[1].value == 0.0
    assert ledger.trajectory[1].level == 0
    assert ledger.trajectory[2] == TrajectoryPoint(3, 0.0, 0)
    assert ledger.state.terminated


O, I = Observation.OUTLIER, Observation.INLIER


def _walk(start: float, steps):
    state = TrustState(start)
    for obs in steps:
        state = update(state, obs)
    return state


def test_update_lands_exactly_on_policy_grid():
    two_down = _walk(0.9, (O, O))
    assert two_down.value == 0.5
    assert authorize(two_down) == AuthLevel(2)

    at_floor = _walk(0.9, (O, O, I, I, O, O))
    assert at_floor.value == 0.2
    assert not at_floor.terminated
    assert authorize(at_floor) == AuthLevel(1)

    assert _walk(0.5, (I,) * 6).value == 0.8
    assert authorize(_walk(0.5, (I,) * 6)) == AuthLevel(3)


def test_update_matches_exact_arithmetic_on_short_walks():
    up, down, floor = Fraction(1, 20), Fraction(1, 5), Fraction(1, 5)
    for start in (Fraction(9, 10), Fraction(1, 2)):
        for steps in product((O, I), repeat=8):
            exact = start
            state = TrustState(float(start))
            for obs in steps:
                exact = max(Fraction(0), exact - down) if obs is O else min(Fraction(1), exact + up)
                state = update(state, obs)
                assert state.value == float(exact)
                assert state.terminated == (exact < floor)
                if state.terminated:
                    break


def test_quantile_threshold_lowers_legitimate_flag_rate():
    cfg = ChannelConfig()
    enroll = probe_sequence(cfg, 256, RngStream(8, "enroll"), hop=True)
    fresh = probe_sequence(cfg, 256, RngStream(8, "fresh"), hop=True)
    plain = enroll_detectors(enroll.gateway, nu=0.05)
    calibrated = enroll_detectors(enroll.gateway, nu=0.05, quantile=0.01)
    for name in ("rssi", "cfo"):
        assert plain[name].threshold == 0.0
        assert calibrated[name].threshold <= 0.0
        rate = np.mean([calibrated[name].is_outlier(g) for g in fresh.gateway])
        assert rate <= np.mean([plain[name].is_outlier(g) for g in fresh.gateway])
        assert rate <= 0.05
    with pytest.raises(ParameterDomain):
        enroll_detectors(enroll.gateway, quantile=1.0)
