import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from eils.ism import (
    InternalState,
    InternalStateModule,
    IsmConfig,
    ValueWindow,
    confidence,
    curiosity_update,
    homeostatic_deficit,
    ism_step,
    stress_update,
)


def brute_population_variance(xs):
    n = len(xs)
    mean = sum(xs) / n
    return sum((x - mean) ** 2 for x in xs) / n


@pytest.mark.parametrize(
    "prev,delta,eta,expected",
    [(0.5, 2.0, 0.05, 0.475), (0.0, -1.0, 0.05, 0.05), (1.0, -3.0, 0.05, 1.10)],
)
def test_stress_update_examples(prev, delta, eta, expected):
    assert stress_update(prev, delta, eta) == pytest.approx(expected, abs=1e-15)


def test_curiosity_update_examples():
    assert curiosity_update(0.0, 0.0, 0.01) == 0.0
    assert curiosity_update(0.5, 1.5, 0.01) == pytest.approx(0.51, abs=1e-15)
    k = 0.0
    for _ in range(5000):
        k = curiosity_update(k, 0.7, 0.01)
    assert k == pytest.approx(0.7, abs=1e-12)


@pytest.mark.parametrize("eta", [0.05, 0.01, 0.3])
@pytest.mark.parametrize("c", [1.0, 0.37, 12.5])
def test_ema_closed_form(eta, c):
    s = k = 0.0
    for t in range(1, 301):
        s = stress_update(s, -c, eta)
        k = curiosity_update(k, c, eta)
        closed = c * (1.0 - (1.0 - eta) ** t)
        assert abs(s - closed) < 1e-12
        assert abs(k - closed) < 1e-12


def test_confidence_examples():
    assert confidence(np.full(10, 3.3)) == 1.0
    assert confidence(np.array([0.0, 2.0])) == pytest.approx(1 / (1 + brute_population_variance([0.0, 2.0])))
    assert confidence(np.array([0.0, 2.0])) == pytest.approx(0.5, abs=1e-15)
    assert confidence(np.array([1.0, 2.0, 3.0])) == pytest.approx(0.6, abs=1e-15)
    assert confidence(np.array([4.0])) == 1.0
    assert confidence(ValueWindow(5)) == 1.0


@settings(max_examples=200, deadline=None)
@given(st.lists(st.floats(-100, 100), min_size=1, max_size=200), st.integers(2, 60))
def test_window_confidence_matches_brute_force_recompute(values, size):
    w = ValueWindow(size)
    for v in values:
        w.push(v)
    recent = values[-size:]
    assert len(w) == len(recent)
    assert list(w.values()) == recent
    expected = 1.0 if len(recent) < 2 else 1.0 / (1.0 + brute_population_variance(recent))
    assert abs(confidence(w) - expected) < 1e-12


@settings(max_examples=200, deadline=None)
@given(st.lists(st.floats(-50, 50), min_size=2, max_size=49))
def test_adding_the_mean_never_lowers_confidence(values):
    w = ValueWindow(50)
    for v in values:
        w.push(v)
    before = confidence(w)
    w.push(float(np.mean(values)))
    assert confidence(w) >= before - 1e-12


def test_deficit_examples():
    sp = np.array([0.0, 0.2, 1.0])
    assert homeostatic_deficit(InternalState(0.0, 0.2, 1.0), sp) == 0.0
    assert homeostatic_deficit(InternalState(1.0, 0.2, 1.0), sp) == pytest.approx(0.5)
    assert homeostatic_deficit(sp + 1.0, sp) == pytest.approx(1.5)


def test_module_deficit_uses_setpoint():
    ism = InternalStateModule(IsmConfig(kappa_set=0.3))
    ism.state = InternalState(0.4, 0.1, 0.7)
    assert ism.deficit() == pytest.approx(homeostatic_deficit(ism.state, ism.setpoint()), abs=1e-15)


def test_ism_converges_to_calm_neutral():
    cfg = IsmConfig()
    state, window = InternalState(2.0, 1.5, 0.2), ValueWindow(cfg.window)
    for _ in range(3000):
        state = ism_step(state, window, 0.0, 0.0, 4.2, cfg)
    assert state.sigma < 1e-12 and state.kappa < 1e-12 and state.phi == 1.0


def test_sustained_negative_td_error_drives_stress_to_one():
    cfg = IsmConfig()
    state, window = InternalState(), ValueWindow(cfg.window)
    for t in range(1, 201):
        state = ism_step(state, window, -1.0, 0.0, 0.0, cfg)
        assert state.sigma == pytest.approx(1 - 0.95**t, abs=1e-12)
    assert state.sigma == pytest.approx(1.0, rel=0.01)


def test_alternating_values_give_low_confidence():
    cfg = IsmConfig()
    state, window = InternalState(), ValueWindow(cfg.window)
    for t in range(200):
        state = ism_step(state, window, 0.0, 0.0, 10.0 * (t % 2), cfg)
    assert state.phi == pytest.approx(1 / (1 + brute_population_variance([0.0, 10.0] * 25)), abs=1e-12)
    assert state.phi == pytest.approx(0.0385, abs=1e-4)


@settings(max_examples=100, deadline=None)
@given(st.lists(st.tuples(st.floats(-20, 20), st.floats(0, 20)), min_size=1, max_size=300))
def test_bounded_impulses_keep_emas_bounded(stream):
    cfg = IsmConfig()
    bound = max(max(-d, 0.0) for d, _ in stream)
    kbound = max(i for _, i in stream)
    state, window = InternalState(), ValueWindow(cfg.window)
    for delta, impulse in stream:
        state = ism_step(state, window, delta, impulse, 0.0, cfg)
        assert 0.0 <= state.sigma <= bound + 1e-12
        assert 0.0 <= state.kappa <= kbound + 1e-12
        assert 0.0 < state.phi <= 1.0


@settings(max_examples=100, deadline=None)
@given(st.floats(0, 50), st.lists(st.floats(0, 100), min_size=1, max_size=100))
def test_pleasant_surprises_never_raise_stress(start, deltas):
    s = start
    for d in deltas:
        nxt = stress_update(s, d, 0.05)
        assert nxt <= s
        s = nxt


def test_kappa_set_calibration_freezes_after_budget():
    ism = InternalStateModule(IsmConfig(calibration_steps=3))
    for impulse in (1.0, 2.0, 6.0, 100.0, 100.0):
        ism.step(0.0, impulse, 0.0)
    assert ism.calibrated
    assert ism.kappa_set == pytest.approx(3.0)
    fixed = InternalStateModule(IsmConfig(kappa_set=0.25))
    fixed.step(0.0, 9.0, 0.0)
    assert fixed.kappa_set == 0.25


def test_config_validation():
    with pytest.raises(ValueError):
        IsmConfig(stress_decay=1.0)
    with pytest.raises(ValueError):
        IsmConfig(window=1)
