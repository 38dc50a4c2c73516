"""Transfer functions from internal state to PPO hyperparameters."""

from __future__ import annotations

import math
from dataclasses import dataclass

from eils.ism import InternalState

# entropy coefficient used whenever curiosity modulation is switched off
FIXED_ENTROPY = 0.01


@dataclass(frozen=True)
class ModulationConfig:
    alpha_base: float = 3e-4
    stress_gain: float = 5.0
    beta_min: float = 0.0
    beta_max: float = 0.1
    eps_base: float = 0.2
    confidence_gain: float = 0.5
    disable_stress: bool = False
    disable_curiosity: bool = False
    disable_confidence: bool = False

    def __post_init__(self) -> None:
        if self.stress_gain < 0:
            raise ValueError("stress_gain must be >= 0")
        if self.beta_min > self.beta_max:
            raise ValueError("beta_min must not exceed beta_max")
        if not 0.0 <= self.confidence_gain < 1.0:
            raise ValueError("confidence_gain must lie in [0, 1)")
        if not 0.0 < self.eps_base < 1.0:
            raise ValueError("eps_base must lie in (0, 1)")
        if not self.alpha_base > 0:
            raise ValueError("alpha_base must be positive")


@dataclass(frozen=True)
class HyperparamSet:
    lr: float
    entropy_coef: float
    clip: float


def _sigmoid(x: float) -> float:
    if x >= 0:
        return 1.0 / (1.0 + math.exp(-x))
    e = math.exp(x)
    return e / (1.0 + e)


def modulate_lr(sigma: float, cfg: ModulationConfig) -> float:
    if cfg.disable_stress:
        return cfg.alpha_base
    return cfg.alpha_base * (1.0 + cfg.stress_gain * math.tanh(sigma))


def modulate_entropy(kappa: float, kappa_set: float, cfg: ModulationConfig) -> float:
    if cfg.disable_curiosity:
        return FIXED_ENTROPY
    return cfg.beta_min + (cfg.beta_max - cfg.beta_min) * _sigmoid(kappa_set - kappa)


def modulate_clip(phi: float, cfg: ModulationConfig) -> float:
    if cfg.disable_confidence:
        return cfg.eps_base
    return cfg.eps_base * (1.0 - cfg.confidence_gain * phi)


def modulate(s_int: InternalState, kappa_set: float, cfg: ModulationConfig) -> HyperparamSet:
    return HyperparamSet(
        modulate_lr(s_int.sigma, cfg),
        modulate_entropy(s_int.kappa, kappa_set, cfg),
        modulate_clip(s_int.phi, cfg),
    )
