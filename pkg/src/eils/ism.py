"""Internal State Module: stress, curiosity and confidence signals.

Stress and curiosity are exponential moving averages of nonnegative
impulses (rectified negative TD error and forward-model error). Confidence
is ``1 / (1 + Var)`` over a sliding window of recent critic values.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


@dataclass(frozen=True)
class IsmConfig:
    stress_decay: float = 0.05
    curiosity_decay: float = 0.01
    window: int = 50
    # None: calibrate from the first `calibration_steps` curiosity impulses
    kappa_set: float | None = None
    calibration_steps: int = 500

    def __post_init__(self) -> None:
        for name in ("stress_decay", "curiosity_decay"):
            eta = getattr(self, name)
            if not 0.0 < eta < 1.0:
                raise ValueError(f"{name} must lie in (0, 1), got {eta}")
        if self.window < 2:
            raise ValueError("confidence window must hold at least 2 values")
        if self.calibration_steps < 1:
            raise ValueError("calibration_steps must be >= 1")


@dataclass
class InternalState:
    sigma: float = 0.0
    kappa: float = 0.0
    phi: float = 1.0

    def as_array(self) -> np.ndarray:
        return np.array([self.sigma, self.kappa, self.phi])


class ValueWindow:
    """Ring buffer of the last ``size`` critic values; the oldest is evicted first."""

    def __init__(self, size: int):
        self.size = size
        self._buf = np.zeros(size)
        self._n = 0
        self._head = 0

    def push(self, v: float) -> None:
        self._buf[self._head] = v
        self._head = (self._head + 1) % self.size
        self._n = min(self._n + 1, self.size)

    def values(self) -> np.ndarray:
        """Contents oldest-first."""
        if self._n < self.size:
            return self._buf[: self._n].copy()
        return np.roll(self._buf, -self._head)

    def variance(self) -> float:
        vals = self._buf[: self._n]
        d = vals - vals.sum() / self._n
        return float(d @ d) / self._n

    def __len__(self) -> int:
        return self._n


def stress_update(sigma_prev: float, delta: float, eta: float) -> float:
    return (1.0 - eta) * sigma_prev + eta * max(0.0, -delta)


def curiosity_update(kappa_prev: float, impulse: float, eta: float) -> float:
    return (1.0 - eta) * kappa_prev + eta * impulse


def confidence(window: ValueWindow | np.ndarray) -> float:
    """``1 / (1 + population variance)``; 1.0 while fewer than two values are held."""
    if isinstance(window, ValueWindow):
        return 1.0 if len(window) < 2 else 1.0 / (1.0 + window.variance())
    vals = np.asarray(window, dtype=np.float64)
    if len(vals) < 2:
        return 1.0
    return 1.0 / (1.0 + float(np.var(vals)))


def homeostatic_deficit(s_int: InternalState | np.ndarray, setpoint: np.ndarray) -> float:
    """Half squared distance to the setpoint. Logged only; never optimized."""
    s = s_int.as_array() if isinstance(s_int, InternalState) else np.asarray(s_int, dtype=np.float64)
    d = s - np.asarray(setpoint, dtype=np.float64)
    return 0.5 * float(d @ d)


@dataclass
class InternalStateModule:
    """Per-agent ISM: owns the state, the value window and the curiosity setpoint."""

    cfg: IsmConfig = field(default_factory=IsmConfig)
    state: InternalState = field(default_factory=InternalState)
    window: ValueWindow = field(init=False)
    _calib_sum: float = field(default=0.0, init=False)
    _calib_n: int = field(default=0, init=False)

    def __post_init__(self) -> None:
        self.window = ValueWindow(self.cfg.window)

    @property
    def kappa_set(self) -> float:
        if self.cfg.kappa_set is not None:
            return self.cfg.kappa_set
        # running mean until the calibration budget is spent, then frozen
        return self._calib_sum / self._calib_n if self._calib_n else 0.0

    @property
    def calibrated(self) -> bool:
        return self.cfg.kappa_set is not None or self._calib_n >= self.cfg.calibration_steps

    def setpoint(self) -> np.ndarray:
        return np.array([0.0, self.kappa_set, 1.0])

    def deficit(self) -> float:
        s = self.state
        dk = s.kappa - self.kappa_set
        return 0.5 * (s.sigma * s.sigma + dk * dk + (s.phi - 1.0) ** 2)

    def step(self, delta: float, impulse: float, value: float) -> InternalState:
        if self.cfg.kappa_set is None and self._calib_n < self.cfg.calibration_steps:
            self._calib_sum += impulse
            self._calib_n += 1
        self.state = ism_step(self.state, self.window, delta, impulse, value, self.cfg)
        return self.state


def ism_step(
    state: InternalState,
    window: ValueWindow,
    delta: float,
    impulse: float,
    value: float,
    cfg: IsmConfig,
) -> InternalState:
    """Stress and curiosity EMA updates, then push ``value`` and recompute confidence.

    ``window`` is mutated; the returned state is new.
    """
    sigma = stress_update(state.sigma, delta, cfg.stress_decay)
    kappa = curiosity_update(state.kappa, impulse, cfg.curiosity_decay)
    window.push(value)
    return InternalState(sigma, kappa, confidence(window))
