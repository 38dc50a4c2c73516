import dataclasses
import math

import numpy as np
import pytest

from eils.ism import InternalState
from eils.modulation import (
    FIXED_ENTROPY,
    HyperparamSet,
    ModulationConfig,
    modulate,
    modulate_clip,
    modulate_entropy,
    modulate_lr,
)

CFG = ModulationConfig()


def test_lr_examples():
    assert modulate_lr(0.0, CFG) == 3e-4
    assert modulate_lr(3.5, CFG) == pytest.approx(1.797e-3, abs=1e-6)
    assert modulate_lr(3.5, CFG) == pytest.approx(1.8e-3, rel=0.01)
    assert modulate_lr(1e6, CFG) == pytest.approx(6 * 3e-4, rel=1e-15)


def test_entropy_examples():
    assert modulate_entropy(0.4, 0.4, CFG) == pytest.approx(0.05)
    assert modulate_entropy(1e4, 0.4, CFG) == pytest.approx(0.0, abs=1e-12)
    logistic = 1 / (1 + math.exp(-2.0))
    assert modulate_entropy(0.0, 2.0, CFG) == pytest.approx(0.1 * logistic, abs=1e-15)
    assert round(modulate_entropy(0.0, 2.0, CFG), 5) == 0.08808


def test_clip_examples():
    assert modulate_clip(0.0, CFG) == 0.2
    assert modulate_clip(1.0, CFG) == pytest.approx(0.1)
    assert modulate_clip(0.5, CFG) == pytest.approx(0.15)


def test_modulate_composes_all_three():
    hp = modulate(InternalState(0.0, 0.3, 1.0), 0.3, CFG)
    assert hp == HyperparamSet(pytest.approx(3e-4), pytest.approx(0.05), pytest.approx(0.1))


def test_all_flags_give_vanilla_ppo():
    cfg = ModulationConfig(disable_stress=True, disable_curiosity=True, disable_confidence=True)
    rng = np.random.default_rng(0)
    for _ in range(100):
        s = InternalState(rng.uniform(0, 10), rng.uniform(0, 5), rng.uniform(0.01, 1))
        assert modulate(s, rng.uniform(0, 5), cfg) == HyperparamSet(3e-4, FIXED_ENTROPY, 0.2)


def test_stress_ablation_only_pins_lr():
    cfg = ModulationConfig(disable_stress=True)
    hp = modulate(InternalState(4.0, 0.0, 0.5), 2.0, cfg)
    assert hp.lr == cfg.alpha_base
    assert hp.entropy_coef == pytest.approx(modulate_entropy(0.0, 2.0, CFG))
    assert hp.clip == pytest.approx(0.15)


@pytest.mark.parametrize("flag,field", [
    ("disable_stress", "lr"),
    ("disable_curiosity", "entropy_coef"),
    ("disable_confidence", "clip"),
])
def test_each_flag_changes_exactly_one_component(flag, field):
    rng = np.random.default_rng(1)
    for _ in range(200):
        s = InternalState(rng.uniform(0.01, 5), rng.uniform(0, 3), rng.uniform(0.01, 1))
        ks = rng.uniform(0, 3)
        base = modulate(s, ks, CFG)
        off = modulate(s, ks, dataclasses.replace(CFG, **{flag: True}))
        diffs = [f for f in ("lr", "entropy_coef", "clip") if getattr(base, f) != getattr(off, f)]
        assert diffs == [field]


def test_bounds_monotonicity_and_oracle_over_a_million_states():
    rng = np.random.default_rng(2024)
    n = 1_000_000
    sigma = rng.exponential(2.0, n)
    kappa = rng.exponential(1.0, n)
    kappa_set = rng.exponential(1.0, n)
    phi = rng.uniform(1e-9, 1.0, n)
    hps = [modulate(InternalState(s, k, p), ks, CFG) for s, k, p, ks in zip(sigma, kappa, phi, kappa_set)]
    lr = np.array([h.lr for h in hps])
    beta = np.array([h.entropy_coef for h in hps])
    eps = np.array([h.clip for h in hps])
    # independent vectorized restatement of the three maps
    np.testing.assert_allclose(lr, CFG.alpha_base * (1 + CFG.stress_gain * np.tanh(sigma)), rtol=1e-14)
    logistic = 1 / (1 + np.exp(-(kappa_set - kappa)))
    np.testing.assert_allclose(beta, CFG.beta_min + (CFG.beta_max - CFG.beta_min) * logistic, rtol=1e-12, atol=1e-17)
    np.testing.assert_allclose(eps, CFG.eps_base * (1 - CFG.confidence_gain * phi), rtol=1e-14)
    assert np.all((lr >= CFG.alpha_base) & (lr <= CFG.alpha_base * (1 + CFG.stress_gain)))
    assert np.all((beta >= CFG.beta_min) & (beta <= CFG.beta_max))
    assert np.all((eps >= CFG.eps_base * (1 - CFG.confidence_gain)) & (eps <= CFG.eps_base))
    order = np.argsort(sigma)
    assert np.all(np.diff(lr[order]) >= 0)
    order = np.argsort(phi)
    assert np.all(np.diff(eps[order]) <= 0)


def test_maps_are_continuous():
    h = 1e-9
    for x in np.linspace(0, 10, 101):
        assert abs(modulate_lr(x + h, CFG) - modulate_lr(x, CFG)) < 1e-9
        assert abs(modulate_entropy(x + h, 1.0, CFG) - modulate_entropy(x, 1.0, CFG)) < 1e-9
    for p in np.linspace(0, 1 - h, 101):
        assert abs(modulate_clip(p + h, CFG) - modulate_clip(p, CFG)) < 1e-9


def test_entropy_decreases_as_curiosity_exceeds_setpoint():
    vals = [modulate_entropy(k, 0.5, CFG) for k in np.linspace(0, 20, 200)]
    assert all(a >= b for a, b in zip(vals, vals[1:]))


def test_config_validation():
    with pytest.raises(ValueError):
        ModulationConfig(alpha_base=0.0)
    with pytest.raises(ValueError):
        ModulationConfig(beta_min=0.2, beta_max=0.1)
