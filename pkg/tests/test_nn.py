import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from eils.nn import (
    GradientSet,
    MlpNet,
    NonFiniteError,
    OptimizerState,
    adam_step,
    categorical_entropy,
    categorical_sample,
    init_mlp,
    mlp_backward,
    mlp_forward,
    zeros_mlp,
)


def scalar_forward(net: MlpNet, x):
    """Loop-only reference forward pass, no vectorized matmuls."""
    h = [float(v) for v in x]
    n_layers = len(net.weights)
    for li, (w, b) in enumerate(zip(net.weights, net.biases)):
        out = []
        for j in range(w.shape[1]):
            acc = float(b[j])
            for i in range(w.shape[0]):
                acc += h[i] * float(w[i, j])
            out.append(acc if li == n_layers - 1 else math.tanh(acc))
        h = out
    if net.head == "softmax":
        m = max(h)
        e = [math.exp(v - m) for v in h]
        s = sum(e)
        h = [v / s for v in e]
    return h


def fd_relative_errors(net, x, g, n_probes, rng, h=1e-5):
    grads = mlp_backward(net, x, g)
    params, garrs = net.params(), grads.arrays()
    errs = []
    for _ in range(n_probes):
        k = int(rng.integers(len(params)))
        p = params[k]
        idx = tuple(int(rng.integers(s)) for s in p.shape)
        old = p[idx]
        p[idx] = old + h
        fp = float(np.sum(mlp_forward(net, x) * g))
        p[idx] = old - h
        fm = float(np.sum(mlp_forward(net, x) * g))
        p[idx] = old
        fd = (fp - fm) / (2 * h)
        an = garrs[k][idx]
        errs.append(abs(fd - an) / max(abs(fd), abs(an), 1e-8))
    return np.array(errs)


def test_zero_net_gives_zero_logits_and_uniform_softmax():
    net = zeros_mlp((4, 64, 64, 3))
    assert np.array_equal(mlp_forward(net, np.ones(4)), np.zeros(3))
    net.head = "softmax"
    np.testing.assert_allclose(mlp_forward(net, np.array([3.0, -1.0, 0.5, 2.0])), np.full(3, 1 / 3), atol=1e-15)


def test_scalar_chain_matches_hand_evaluation():
    net = MlpNet([np.ones((1, 1)) for _ in range(3)], [np.zeros(1) for _ in range(3)])
    out = mlp_forward(net, np.array([2.0]))
    assert out[0] == pytest.approx(math.tanh(math.tanh(2.0)), abs=1e-15)


@pytest.mark.parametrize("head", ["linear", "softmax"])
def test_forward_matches_scalar_loop_oracle(head):
    rng = np.random.default_rng(7)
    net = init_mlp((4, 64, 64, 3), rng, head)
    x = rng.normal(size=4)
    np.testing.assert_allclose(mlp_forward(net, x), scalar_forward(net, x), rtol=1e-12, atol=1e-14)


def test_forward_rejects_wrong_dimension():
    net = init_mlp((4, 64, 64, 2), np.random.default_rng(0))
    with pytest.raises(ValueError):
        mlp_forward(net, np.zeros(3))
    with pytest.raises(ValueError):
        mlp_backward(net, np.zeros(4), np.zeros(3))


def test_init_shapes_and_fan_in_bounds():
    net = init_mlp((6, 64, 64, 4), np.random.default_rng(1))
    assert net.sizes == (6, 64, 64, 4)
    for w, b in zip(net.weights, net.biases):
        bound = 1 / math.sqrt(w.shape[0])
        assert np.all(np.abs(w) <= bound) and np.all(np.abs(b) <= bound)
        assert b.shape == (w.shape[1],)


def test_zero_output_grad_gives_zero_gradients():
    net = init_mlp((4, 64, 64, 2), np.random.default_rng(2))
    grads = mlp_backward(net, np.ones(4), np.zeros(2))
    assert all(np.all(g == 0) for g in grads.arrays())


def test_scalar_net_gradient_vs_finite_difference():
    rng = np.random.default_rng(3)
    net = init_mlp((1, 1, 1, 1), rng)
    errs = fd_relative_errors(net, np.array([0.7]), np.array([1.0]), 30, rng)
    assert errs.max() < 1e-4


@pytest.mark.parametrize(
    "sizes,head",
    [
        ((4, 64, 64, 2), "linear"),
        ((4, 64, 64, 3), "linear"),  # cartpole actor-critic: 2 logits + value
        ((2, 64, 64, 5), "linear"),  # maze actor-critic
        ((6, 64, 64, 5), "linear"),  # reversal actor-critic
        ((8, 64, 64, 4), "linear"),  # maze dynamics model
        ((10, 64, 64, 6), "linear"),  # reversal dynamics model
        ((6, 64, 64, 4), "linear"),  # cartpole dynamics model
        ((4, 64, 64, 2), "softmax"),
    ],
)
def test_gradients_vs_finite_difference_100_probes(sizes, head):
    rng = np.random.default_rng(sum(sizes))
    net = init_mlp(sizes, rng, head)
    x = rng.normal(size=sizes[0])
    g = rng.normal(size=sizes[-1])
    errs = fd_relative_errors(net, x, g, 100, rng)
    assert errs.max() < 1e-3


def test_batched_backward_sums_per_sample_gradients():
    rng = np.random.default_rng(4)
    net = init_mlp((3, 64, 64, 2), rng, "softmax")
    xs = rng.normal(size=(5, 3))
    gs = rng.normal(size=(5, 2))
    total = mlp_backward(net, xs, gs)
    acc = mlp_backward(net, xs[0], gs[0])
    for x, g in zip(xs[1:], gs[1:]):
        acc = acc + mlp_backward(net, x, g)
    for a, b in zip(total.arrays(), acc.arrays()):
        np.testing.assert_allclose(a, b, rtol=1e-10, atol=1e-12)


@settings(max_examples=200, deadline=None)
@given(st.lists(st.floats(-50, 50), min_size=4, max_size=4), st.integers(0, 2**16))
def test_softmax_head_is_a_probability_vector(x, seed):
    net = init_mlp((4, 64, 64, 4), np.random.default_rng(seed), "softmax")
    p = mlp_forward(net, np.array(x))
    assert np.all(p >= 0)
    assert abs(p.sum() - 1.0) < 1e-6


def _scalar_net(value=0.0):
    return MlpNet([np.full((1, 1), value)], [np.zeros(1)])


def _grads(g):
    return GradientSet([np.full((1, 1), g)], [np.zeros(1)])


def test_adam_zero_gradient_leaves_params_and_decays_moments():
    net = _scalar_net(0.5)
    opt = OptimizerState.for_net(net)
    opt.m[0][:] = 1.0
    opt.v[0][:] = 1.0
    adam_step(net, _grads(0.0), opt, 1e-3)
    # bias-corrected first moment is nonzero here, so compare moments only
    assert opt.m[0][0, 0] == pytest.approx(0.9)
    assert opt.v[0][0, 0] == pytest.approx(0.999)
    net2 = _scalar_net(0.5)
    opt2 = OptimizerState.for_net(net2)
    adam_step(net2, _grads(0.0), opt2, 1e-3)
    assert net2.weights[0][0, 0] == 0.5


def test_adam_first_step_moves_by_lr():
    net = _scalar_net(0.0)
    opt = OptimizerState.for_net(net)
    adam_step(net, _grads(1.0), opt, 0.001)
    # t = 1: m_hat = g, v_hat = g^2, step = lr * 1 / (1 + eps)
    assert net.weights[0][0, 0] == pytest.approx(-0.001 / (1 + 1e-8), abs=1e-15)
    assert opt.step == 1


def test_adam_displacement_scales_with_lr():
    moves = []
    for lr in (3e-4, 1.8e-3):
        net = _scalar_net(0.0)
        adam_step(net, _grads(0.37), OptimizerState.for_net(net), lr)
        moves.append(-net.weights[0][0, 0])
    assert moves[1] / moves[0] == pytest.approx(6.0, rel=1e-12)


@settings(max_examples=100, deadline=None)
@given(st.floats(1e-6, 1e-1), st.floats(-10, 10).filter(lambda g: abs(g) > 1e-3))
def test_adam_first_step_is_linear_in_lr(lr, g):
    net = _scalar_net(0.0)
    adam_step(net, _grads(g), OptimizerState.for_net(net), lr)
    expected = -lr * g / (abs(g) + 1e-8)
    assert abs(net.weights[0][0, 0] - expected) < 1e-9


def test_adam_counter_and_nonfinite_rejection():
    net = _scalar_net(1.0)
    opt = OptimizerState.for_net(net)
    for i in range(3):
        adam_step(net, _grads(0.1), opt, 1e-3)
        assert opt.step == i + 1
    before = net.weights[0].copy()
    with pytest.raises(NonFiniteError):
        adam_step(net, _grads(float("nan")), opt, 1e-3)
    assert opt.step == 3
    assert np.array_equal(net.weights[0], before)
    with pytest.raises(ValueError):
        adam_step(net, _grads(0.1), opt, 0.0)


def test_training_trajectory_is_bit_identical_across_runs():
    def trajectory():
        rng = np.random.default_rng(11)
        net = init_mlp((4, 64, 64, 2), rng, "softmax")
        opt = OptimizerState.for_net(net)
        for _ in range(20):
            x = rng.normal(size=(8, 4))
            adam_step(net, mlp_backward(net, x, rng.normal(size=(8, 2))), opt, 1e-3)
        return np.concatenate([p.ravel() for p in net.params()])

    assert np.array_equal(trajectory(), trajectory())


def test_categorical_sample_deterministic_cases():
    rng = np.random.default_rng(0)
    assert all(categorical_sample(np.array([1.0, 0.0]), rng) == 0 for _ in range(200))
    assert all(categorical_sample(np.array([0.0, 1.0]), rng) == 1 for _ in range(200))
    with pytest.raises(ValueError):
        categorical_sample(np.zeros(3), rng)


def test_categorical_sample_frequency():
    rng = np.random.default_rng(123)
    draws = [categorical_sample(np.array([0.5, 0.5]), rng) for _ in range(10_000)]
    assert 0.47 <= draws.count(0) / 10_000 <= 0.53


def test_categorical_sample_reproducible():
    probs = np.array([0.1, 0.6, 0.3])
    seqs = []
    for _ in range(2):
        rng = np.random.default_rng(99)
        seqs.append([categorical_sample(probs, rng) for _ in range(500)])
    assert seqs[0] == seqs[1]


def test_categorical_entropy_values():
    assert categorical_entropy(np.array([1.0, 0.0, 0.0])) == 0.0
    assert categorical_entropy(np.full(4, 0.25)) == pytest.approx(math.log(4))
    expected = -(0.8 * math.log(0.8) + 0.2 * math.log(0.2))
    assert categorical_entropy(np.array([0.8, 0.2])) == pytest.approx(expected, abs=1e-15)
    assert round(categorical_entropy(np.array([0.8, 0.2])), 4) == 0.5004
