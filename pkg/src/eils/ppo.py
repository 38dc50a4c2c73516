"""Clipped-surrogate actor-critic whose lr, entropy coefficient and clip range
arrive with every update.

The actor and critic share one Tanh backbone: a single ``MlpNet`` whose
linear output stacks ``n_actions`` policy logits and one value estimate, so
both heads read exactly the same 64-unit features.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from eils.modulation import HyperparamSet
from eils.nn import (
    HIDDEN,
    MlpNet,
    NonFiniteError,
    OptimizerState,
    adam_step,
    backward_cached,
    clip_grad_norm,
    forward_cached,
    init_mlp,
    log_softmax,
    softmax,
)


@dataclass(frozen=True)
class PpoConfig:
    gamma: float = 0.99
    clip_base: float = 0.2
    lr_base: float = 3e-4
    batch_size: int = 256
    gae_lambda: float = 0.95
    epochs: int = 10
    minibatch_size: int = 32
    # the critic shares the trunk; a large value weight on ~100-scale returns swamps the policy gradient
    value_coef: float = 0.05
    max_grad_norm: float = 0.5

    def __post_init__(self) -> None:
        if not 0.0 <= self.gamma <= 1.0:
            raise ValueError("gamma must lie in [0, 1]")
        if not 0.0 < self.clip_base < 1.0:
            raise ValueError("clip_base must lie in (0, 1)")
        if not 0.0 <= self.gae_lambda <= 1.0:
            raise ValueError("gae_lambda must lie in [0, 1]")
        positive = (self.lr_base, self.batch_size, self.epochs, self.minibatch_size, self.value_coef, self.max_grad_norm)
        if any(not p > 0 for p in positive):
            raise ValueError("PPO sizes and coefficients must be positive")


@dataclass
class AgentNets:
    net: MlpNet
    n_actions: int

    @classmethod
    def create(cls, obs_dim: int, n_actions: int, rng: np.random.Generator) -> "AgentNets":
        return cls(init_mlp((obs_dim, HIDDEN, HIDDEN, n_actions + 1), rng), n_actions)

    def features(self, obs: np.ndarray) -> np.ndarray:
        _, acts = forward_cached(self.net, np.atleast_2d(obs))
        return acts[-2]

    def evaluate(self, obs: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """Batched ``(probs, values)``."""
        out, _ = forward_cached(self.net, np.atleast_2d(obs))
        return softmax(out[:, : self.n_actions]), out[:, self.n_actions]

    def act(self, obs: np.ndarray, rng: np.random.Generator) -> tuple[int, float, float]:
        """Sample an action; returns ``(action, log_prob, value)``."""
        h = obs
        w, b = self.net.weights, self.net.biases
        h = np.tanh(h @ w[0] + b[0])
        h = np.tanh(h @ w[1] + b[1])
        out = (h @ w[2] + b[2]).tolist()
        logits = out[: self.n_actions]
        top = max(logits)
        exps = [math.exp(z - top) for z in logits]
        total = sum(exps)
        u = rng.random() * total
        a, acc = 0, exps[0]
        while acc <= u and a < self.n_actions - 1:
            a += 1
            acc += exps[a]
        return a, logits[a] - top - math.log(total), out[self.n_actions]

    def value(self, obs: np.ndarray) -> float:
        return float(self.evaluate(obs)[1][0])


@dataclass
class Transition:
    obs: np.ndarray
    action: int
    reward: float
    next_obs: np.ndarray
    done: bool
    log_prob: float
    value: float
    next_value: float = 0.0
    terminated: bool = False
    td_error: float = 0.0


def td_error(r: float, v_s: float, v_next: float, done: bool, gamma: float) -> float:
    return r + gamma * v_next * (1.0 - float(done)) - v_s


@dataclass
class RolloutBuffer:
    """Transitions of one collection phase plus their advantages.

    ``done`` marks any episode boundary (it cuts the advantage recursion);
    ``terminated`` marks true terminal states (it removes the bootstrap).
    A time-limit truncation is ``done`` but not ``terminated``.
    """

    transitions: list[Transition] = field(default_factory=list)
    advantages: np.ndarray | None = None
    returns: np.ndarray | None = None

    def add(self, t: Transition) -> None:
        self.transitions.append(t)

    def __len__(self) -> int:
        return len(self.transitions)

    def clear(self) -> None:
        self.transitions.clear()
        self.advantages = None
        self.returns = None

    def column(self, name: str) -> np.ndarray:
        return np.array([getattr(t, name) for t in self.transitions])

    def td_errors(self, gamma: float) -> np.ndarray:
        r = self.column("reward")
        v = self.column("value")
        vn = self.column("next_value")
        term = self.column("terminated").astype(np.float64)
        return r + gamma * vn * (1.0 - term) - v


def compute_gae(
    buffer: RolloutBuffer, gamma: float, gae_lambda: float, normalize: bool = True
) -> tuple[np.ndarray, np.ndarray]:
    """Generalized advantage estimates and value targets.

    Return targets use the raw advantages; the stored advantages are then
    normalized to zero mean and unit (population) variance when ``normalize``.
    """
    if len(buffer) == 0:
        raise ValueError("cannot compute advantages of an empty buffer")
    deltas = buffer.td_errors(gamma)
    done = buffer.column("done").astype(np.float64)
    adv = np.zeros_like(deltas)
    running = 0.0
    for t in range(len(deltas) - 1, -1, -1):
        running = deltas[t] + gamma * gae_lambda * (1.0 - done[t]) * running
        adv[t] = running
    returns = adv + buffer.column("value")
    if normalize:
        adv = normalize_advantages(adv)
    for t, d in zip(buffer.transitions, deltas):
        t.td_error = float(d)
    buffer.advantages, buffer.returns = adv, returns
    return adv, returns


def normalize_advantages(adv: np.ndarray) -> np.ndarray:
    centered = adv - adv.mean()
    std = centered.std()
    return centered / std if std > 1e-12 else centered


def clipped_surrogate(logp_new, logp_old, advantage, eps: float):
    ratio = np.exp(np.asarray(logp_new) - np.asarray(logp_old))
    return np.minimum(ratio * advantage, np.clip(ratio, 1.0 - eps, 1.0 + eps) * advantage)


@dataclass
class UpdateStats:
    policy_loss: float
    value_loss: float
    entropy: float
    clip_fraction: float
    approx_kl: float
    initial_objective: float
    minibatch_steps: int


def _loss_and_grad(agent: AgentNets, obs, actions, logp_old, adv, ret, hp: HyperparamSet, cfg: PpoConfig):
    n = len(actions)
    k = agent.n_actions
    out, acts = forward_cached(agent.net, obs)
    logits, values = out[:, :k], out[:, k]
    logp_all = log_softmax(logits)
    probs = np.exp(logp_all)
    idx = np.arange(n)
    logp = logp_all[idx, actions]
    ratio = np.exp(logp - logp_old)
    clipped = np.clip(ratio, 1.0 - hp.clip, 1.0 + hp.clip)
    surr = np.minimum(ratio * adv, clipped * adv)
    ent = -np.sum(probs * logp_all, axis=1)
    vloss = (values - ret) ** 2
    loss = -surr.mean() - hp.entropy_coef * ent.mean() + cfg.value_coef * vloss.mean()
    if not np.isfinite(loss):
        raise NonFiniteError("non-finite PPO loss")

    # gradient flows through the ratio only where the unclipped branch is the minimum
    active = ratio * adv <= clipped * adv
    d_logp = np.where(active, -ratio * adv, 0.0) / n
    onehot = np.zeros_like(probs)
    onehot[idx, actions] = 1.0
    g_logits = d_logp[:, None] * (onehot - probs)
    # dH/dlogits_j = -p_j (log p_j + H)
    g_logits += (hp.entropy_coef / n) * probs * (logp_all + ent[:, None])
    g_value = cfg.value_coef * 2.0 * (values - ret) / n
    grads = backward_cached(agent.net, acts, np.column_stack([g_logits, g_value]))
    stats = (
        float(-surr.mean()),
        float(vloss.mean()),
        float(ent.mean()),
        float(np.mean(np.abs(ratio - 1.0) > hp.clip)),
        float(np.mean(logp_old - logp)),
    )
    return loss, grads, stats


def ppo_update(
    agent: AgentNets,
    opt: OptimizerState,
    buffer: RolloutBuffer,
    hp: HyperparamSet,
    cfg: PpoConfig,
    rng: np.random.Generator,
) -> UpdateStats:
    """Several epochs of minibatch Adam on the clipped objective, then clear the buffer.

    ``compute_gae`` must have been run on ``buffer``. On a non-finite loss the
    network and optimizer are restored to their pre-update values and
    ``NonFiniteError`` propagates.
    """
    if buffer.advantages is None:
        raise ValueError("advantages must be computed before the update")
    obs = np.stack(buffer.column("obs"))
    actions = buffer.column("action").astype(np.intp)
    logp_old = buffer.column("log_prob")
    adv, ret = buffer.advantages, buffer.returns
    n = len(actions)

    probs, _ = agent.evaluate(obs)
    logp_fresh = np.log(probs[np.arange(n), actions])
    if np.max(np.abs(logp_fresh - logp_old)) > 1e-8:
        raise AssertionError("behaviour log-probs disagree with the current policy on a fresh buffer")
    initial_objective = float(np.mean(clipped_surrogate(logp_old, logp_old, adv, hp.clip)))

    backup_net, backup_opt = agent.net.copy(), _copy_opt(opt)
    totals = np.zeros(5)
    steps = 0
    mb = min(cfg.minibatch_size, n)
    try:
        for _ in range(cfg.epochs):
            order = rng.permutation(n)
            for start in range(0, n, mb):
                sel = order[start : start + mb]
                _, grads, stats = _loss_and_grad(
                    agent, obs[sel], actions[sel], logp_old[sel], adv[sel], ret[sel], hp, cfg
                )
                grads, _ = clip_grad_norm(grads, cfg.max_grad_norm)
                adam_step(agent.net, grads, opt, hp.lr)
                totals += stats
                steps += 1
    except NonFiniteError:
        agent.net = backup_net
        opt.m, opt.v, opt.step = backup_opt.m, backup_opt.v, backup_opt.step
        raise
    buffer.clear()
    mean = totals / max(steps, 1)
    return UpdateStats(*(float(x) for x in mean), initial_objective=initial_objective, minibatch_steps=steps)


def _copy_opt(opt: OptimizerState) -> OptimizerState:
    return OptimizerState([m.copy() for m in opt.m], [v.copy() for v in opt.v], opt.step, opt.beta1, opt.beta2, opt.eps)


def linear_decay(start: float, end: float, progress: float) -> float:
    """Linear interpolation from ``start`` to ``end``; ``progress`` is clamped to [0, 1]."""
    p = min(max(progress, 0.0), 1.0)
    return start + (end - start) * p
