"""Forward dynamics model whose squared prediction error is the curiosity impulse."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from eils.nn import (
    HIDDEN,
    MlpNet,
    NonFiniteError,
    OptimizerState,
    adam_step,
    backward_cached,
    forward_cached,
    init_mlp,
)


@dataclass
class DynamicsModel:
    net: MlpNet
    opt: OptimizerState
    obs_dim: int
    n_actions: int
    lr: float = 1e-3
    minibatch_size: int = 64

    @classmethod
    def create(
        cls, obs_dim: int, n_actions: int, rng: np.random.Generator, lr: float = 1e-3
    ) -> "DynamicsModel":
        net = init_mlp((obs_dim + n_actions, HIDDEN, HIDDEN, obs_dim), rng)
        return cls(net, OptimizerState.for_net(net), obs_dim, n_actions, lr)

    def inputs(self, obs: np.ndarray, actions: np.ndarray) -> np.ndarray:
        obs = np.atleast_2d(obs)
        actions = np.atleast_1d(np.asarray(actions, dtype=np.intp))
        onehot = np.zeros((len(actions), self.n_actions))
        onehot[np.arange(len(actions)), actions] = 1.0
        return np.hstack([obs, onehot])

    def predict(self, obs: np.ndarray, actions: np.ndarray) -> np.ndarray:
        out, _ = forward_cached(self.net, self.inputs(obs, actions))
        return out


def prediction_error(predicted: np.ndarray, actual: np.ndarray) -> np.ndarray | float:
    """Squared Euclidean norm of ``predicted - actual`` along the last axis."""
    d = np.asarray(predicted, dtype=np.float64) - np.asarray(actual, dtype=np.float64)
    e = np.sum(d * d, axis=-1)
    return float(e) if np.ndim(e) == 0 else e


def curiosity_impulse(model: DynamicsModel, s, a, s_next) -> float | np.ndarray:
    """Per-transition impulse; batched when ``s`` is 2-D."""
    pred = model.predict(s, a)
    err = prediction_error(pred, np.atleast_2d(s_next))
    return float(err[0]) if np.ndim(s) == 1 else err


def dynamics_loss(model: DynamicsModel, obs, actions, next_obs) -> float:
    return float(np.mean(prediction_error(model.predict(obs, actions), np.atleast_2d(next_obs))))


def train_dynamics(
    model: DynamicsModel,
    obs: np.ndarray,
    actions: np.ndarray,
    next_obs: np.ndarray,
    rng: np.random.Generator | None = None,
) -> float:
    """One shuffled minibatch pass over the transitions; returns the post-update mean loss."""
    n = len(actions)
    if n == 0:
        raise ValueError("cannot train the dynamics model on an empty buffer")
    x = model.inputs(obs, actions)
    y = np.atleast_2d(next_obs)
    order = rng.permutation(n) if rng is not None else np.arange(n)
    mb = min(model.minibatch_size, n)
    for start in range(0, n, mb):
        sel = order[start : start + mb]
        out, acts = forward_cached(model.net, x[sel])
        resid = out - y[sel]
        if not np.all(np.isfinite(resid)):
            raise NonFiniteError("non-finite dynamics prediction")
        # d/d_out of mean_i ||out_i - y_i||^2
        grads = backward_cached(model.net, acts, 2.0 * resid / len(sel))
        adam_step(model.net, grads, model.opt, model.lr)
    return dynamics_loss(model, obs, actions, next_obs)
