"""Dense MLP kernel: forward/backward for the fixed Tanh topology, Adam with
an externally supplied step size, and categorical policy helpers.

Weights are stored as ``(fan_in, fan_out)`` so a batch ``X`` of shape
``(n, fan_in)`` maps through ``X @ W + b``. Every function accepts either a
single vector or a 2-D batch.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

HIDDEN = 64


class NonFiniteError(FloatingPointError):
    """Raised when a gradient or loss contains NaN/Inf; the update is skipped."""


@dataclass
class MlpNet:
    weights: list[np.ndarray]
    biases: list[np.ndarray]
    head: str = "linear"  # "linear" | "softmax"
    activation: str = "tanh"

    @property
    def sizes(self) -> tuple[int, ...]:
        return (self.weights[0].shape[0],) + tuple(w.shape[1] for w in self.weights)

    @property
    def input_dim(self) -> int:
        return self.weights[0].shape[0]

    @property
    def output_dim(self) -> int:
        return self.weights[-1].shape[1]

    def params(self) -> list[np.ndarray]:
        return [*self.weights, *self.biases]

    def copy(self) -> "MlpNet":
        return MlpNet(
            [w.copy() for w in self.weights],
            [b.copy() for b in self.biases],
            self.head,
            self.activation,
        )


@dataclass
class GradientSet:
    weights: list[np.ndarray]
    biases: list[np.ndarray]

    def arrays(self) -> list[np.ndarray]:
        return [*self.weights, *self.biases]

    def global_norm(self) -> float:
        return float(np.sqrt(sum(float(np.sum(g * g)) for g in self.arrays())))

    def scaled(self, factor: float) -> "GradientSet":
        return GradientSet([g * factor for g in self.weights], [g * factor for g in self.biases])

    def __add__(self, other: "GradientSet") -> "GradientSet":
        return GradientSet(
            [a + b for a, b in zip(self.weights, other.weights)],
            [a + b for a, b in zip(self.biases, other.biases)],
        )

    def is_finite(self) -> bool:
        return all(np.all(np.isfinite(g)) for g in self.arrays())


@dataclass
class OptimizerState:
    m: list[np.ndarray]
    v: list[np.ndarray]
    step: int = 0
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8

    @classmethod
    def for_net(cls, net: MlpNet) -> "OptimizerState":
        params = net.params()
        return cls([np.zeros_like(p) for p in params], [np.zeros_like(p) for p in params])


def init_mlp(
    sizes: tuple[int, ...] | list[int],
    rng: np.random.Generator,
    head: str = "linear",
) -> MlpNet:
    """Uniform fan-in init in ``±1/sqrt(fan_in)``; each layer draws from its own child stream."""
    if head not in ("linear", "softmax"):
        raise ValueError(f"unknown head {head!r}")
    layer_rngs = rng.spawn(len(sizes) - 1)
    weights, biases = [], []
    for (fan_in, fan_out), lrng in zip(zip(sizes[:-1], sizes[1:]), layer_rngs):
        bound = 1.0 / np.sqrt(fan_in)
        weights.append(lrng.uniform(-bound, bound, size=(fan_in, fan_out)))
        biases.append(lrng.uniform(-bound, bound, size=fan_out))
    return MlpNet(weights, biases, head)


def zeros_mlp(sizes: tuple[int, ...] | list[int], head: str = "linear") -> MlpNet:
    weights = [np.zeros((a, b)) for a, b in zip(sizes[:-1], sizes[1:])]
    biases = [np.zeros(b) for b in sizes[1:]]
    return MlpNet(weights, biases, head)


def softmax(logits: np.ndarray) -> np.ndarray:
    z = logits - np.max(logits, axis=-1, keepdims=True)
    e = np.exp(z)
    return e / np.sum(e, axis=-1, keepdims=True)


def log_softmax(logits: np.ndarray) -> np.ndarray:
    z = logits - np.max(logits, axis=-1, keepdims=True)
    return z - np.log(np.sum(np.exp(z), axis=-1, keepdims=True))


def _as_batch(net: MlpNet, x: np.ndarray) -> tuple[np.ndarray, bool]:
    x = np.asarray(x, dtype=np.float64)
    single = x.ndim == 1
    if single:
        x = x[None, :]
    if x.ndim != 2 or x.shape[1] != net.input_dim:
        raise ValueError(f"input has shape {x.shape}, net expects input_dim={net.input_dim}")
    return x, single


def forward_cached(net: MlpNet, x: np.ndarray) -> tuple[np.ndarray, list[np.ndarray]]:
    """Batched forward pass returning pre-head output plus the per-layer activations.

    The returned output is *before* the softmax head; ``mlp_forward`` applies it.
    """
    h = x
    acts = [x]
    last = len(net.weights) - 1
    for i, (w, b) in enumerate(zip(net.weights, net.biases)):
        z = h @ w + b
        h = z if i == last else np.tanh(z)
        acts.append(h)
    return h, acts


def mlp_forward(net: MlpNet, x: np.ndarray) -> np.ndarray:
    xb, single = _as_batch(net, x)
    out, _ = forward_cached(net, xb)
    if net.head == "softmax":
        out = softmax(out)
    return out[0] if single else out


def backward_cached(net: MlpNet, acts: list[np.ndarray], out_grad: np.ndarray) -> GradientSet:
    """Backprop a gradient on the pre-head output through cached activations.

    Gradients are summed over the batch dimension.
    """
    n_layers = len(net.weights)
    gw: list[np.ndarray] = [None] * n_layers  # type: ignore[list-item]
    gb: list[np.ndarray] = [None] * n_layers  # type: ignore[list-item]
    delta = out_grad
    for i in range(n_layers - 1, -1, -1):
        gw[i] = acts[i].T @ delta
        gb[i] = delta.sum(axis=0)
        if i > 0:
            h = acts[i]
            delta = (delta @ net.weights[i].T) * (1.0 - h * h)
    return GradientSet(gw, gb)


def mlp_backward(net: MlpNet, x: np.ndarray, output_grad: np.ndarray) -> GradientSet:
    """Exact gradient of ``<mlp_forward(net, x), output_grad>`` w.r.t. every parameter."""
    xb, _ = _as_batch(net, x)
    g = np.asarray(output_grad, dtype=np.float64)
    if g.ndim == 1:
        g = g[None, :]
    if g.shape != (xb.shape[0], net.output_dim):
        raise ValueError(f"output_grad has shape {g.shape}, expected ({xb.shape[0]}, {net.output_dim})")
    out, acts = forward_cached(net, xb)
    if net.head == "softmax":
        p = softmax(out)
        g = p * (g - np.sum(p * g, axis=1, keepdims=True))
    return backward_cached(net, acts, g)


def adam_step(net: MlpNet, grads: GradientSet, opt: OptimizerState, lr: float) -> None:
    """In-place adaptive-moment update with step size ``lr`` supplied by the caller."""
    if not lr > 0:
        raise ValueError(f"lr must be positive, got {lr}")
    if not grads.is_finite():
        raise NonFiniteError("non-finite gradient; update skipped")
    params = net.params()
    garrs = grads.arrays()
    if len(garrs) != len(params) or any(g.shape != p.shape for g, p in zip(garrs, params)):
        raise ValueError("gradient shapes do not match network parameters")
    opt.step += 1
    b1, b2 = opt.beta1, opt.beta2
    c1 = 1.0 - b1**opt.step
    c2 = 1.0 - b2**opt.step
    for p, g, m, v in zip(params, garrs, opt.m, opt.v):
        m *= b1
        m += (1.0 - b1) * g
        v *= b2
        v += (1.0 - b2) * (g * g)
        p -= lr * (m / c1) / (np.sqrt(v / c2) + opt.eps)


def clip_grad_norm(grads: GradientSet, max_norm: float) -> tuple[GradientSet, float]:
    norm = grads.global_norm()
    if max_norm > 0 and norm > max_norm:
        return grads.scaled(max_norm / (norm + 1e-12)), norm
    return grads, norm


def categorical_sample(probs: np.ndarray, rng: np.random.Generator) -> int:
    p = np.asarray(probs, dtype=np.float64)
    total = p.sum()
    if not total > 0 or np.any(p < 0):
        raise ValueError("degenerate probability vector")
    if abs(total - 1.0) > 1e-6:
        raise ValueError(f"probabilities sum to {total}, not 1")
    # inverse-CDF keeps the draw to a single uniform so sequences are easy to reproduce
    cdf = np.cumsum(p)
    u = rng.random() * cdf[-1]
    idx = int(np.searchsorted(cdf, u, side="right"))
    # guard against landing on a trailing zero-probability slot from rounding
    while idx >= len(p) or p[idx] == 0.0:
        idx -= 1
    return idx


def categorical_entropy(probs: np.ndarray) -> float | np.ndarray:
    """Entropy in nats along the last axis; zero-probability entries contribute 0."""
    p = np.asarray(probs, dtype=np.float64)
    safe = np.where(p > 0, p, 1.0)
    h = -np.sum(np.where(p > 0, p * np.log(safe), 0.0), axis=-1)
    return float(h) if np.ndim(h) == 0 else h
