"""Fast numerical self-tests behind ``eils check``."""

from __future__ import annotations

import itertools
import math
from typing import Callable

import numpy as np

from eils.ism import ValueWindow, confidence, curiosity_update, stress_update
from eils.modulation import ModulationConfig, modulate_entropy, modulate_lr
from eils.nn import init_mlp, mlp_backward, mlp_forward
from eils.ppo import RolloutBuffer, Transition, compute_gae


def check_gradients(probes: int = 100, tol: float = 1e-3) -> str:
    rng = np.random.default_rng(0)
    worst = 0.0
    for sizes, head in [((4, 64, 64, 3), "linear"), ((2, 64, 64, 5), "softmax"), ((10, 64, 64, 6), "linear")]:
        net = init_mlp(sizes, rng, head)
        x, g = rng.normal(size=sizes[0]), rng.normal(size=sizes[-1])
        grads = mlp_backward(net, x, g).arrays()
        params = net.params()
        for _ in range(probes):
            k = int(rng.integers(len(params)))
            idx = tuple(int(rng.integers(s)) for s in params[k].shape)
            old = params[k][idx]
            params[k][idx] = old + 1e-5
            fp = float(np.sum(mlp_forward(net, x) * g))
            params[k][idx] = old - 1e-5
            fm = float(np.sum(mlp_forward(net, x) * g))
            params[k][idx] = old
            fd = (fp - fm) / 2e-5
            worst = max(worst, abs(fd - grads[k][idx]) / max(abs(fd), abs(grads[k][idx]), 1e-8))
    if worst >= tol:
        raise AssertionError(f"gradient relative error {worst:.2e} >= {tol}")
    return f"max relative error {worst:.1e}"


def check_gae(tol: float = 1e-10) -> str:
    rng = np.random.default_rng(1)
    cases = 0
    for n in range(1, 9):
        for dones in itertools.product([False, True], repeat=n):
            r, v, vn = rng.normal(size=(3, n))
            buf = RolloutBuffer()
            for i in range(n):
                buf.add(Transition(np.zeros(1), 0, r[i], np.zeros(1), dones[i], 0.0, v[i], vn[i], dones[i]))
            adv, _ = compute_gae(buf, 0.99, 0.95, normalize=False)
            deltas = r + 0.99 * vn * (1 - np.array(dones, dtype=float)) - v
            for t in range(n):
                acc, coef = 0.0, 1.0
                for k in range(t, n):
                    acc += coef * deltas[k]
                    if dones[k]:
                        break
                    coef *= 0.99 * 0.95
                if abs(acc - adv[t]) > tol:
                    raise AssertionError(f"GAE mismatch at length {n}, step {t}")
            cases += 1
    return f"{cases} trajectories"


def check_signals(tol: float = 1e-12) -> str:
    s = k = 0.0
    for t in range(1, 201):
        s = stress_update(s, -1.0, 0.05)
        k = curiosity_update(k, 1.0, 0.01)
        if abs(s - (1 - 0.95**t)) > tol or abs(k - (1 - 0.99**t)) > tol:
            raise AssertionError(f"EMA closed form violated at step {t}")
    w = ValueWindow(50)
    rng = np.random.default_rng(2)
    vals = rng.normal(size=80).tolist()
    for x in vals:
        w.push(x)
    tail = vals[-50:]
    mean = sum(tail) / 50
    brute = 1 / (1 + sum((x - mean) ** 2 for x in tail) / 50)
    if abs(confidence(w) - brute) > tol:
        raise AssertionError("confidence disagrees with brute-force variance")
    return "EMA and confidence oracles"


def check_modulation() -> str:
    cfg = ModulationConfig()
    if not math.isclose(modulate_lr(1e9, cfg), 6 * cfg.alpha_base, rel_tol=1e-12):
        raise AssertionError("lr ceiling is not 6x the base")
    if not math.isclose(modulate_entropy(0.3, 0.3, cfg), 0.05, rel_tol=1e-12):
        raise AssertionError("entropy midpoint is not 0.05")
    return "endpoints"


CHECKS: dict[str, Callable[[], str]] = {
    "gradients": check_gradients,
    "gae": check_gae,
    "signals": check_signals,
    "modulation": check_modulation,
}


def run_checks(echo: Callable[[str], None] = print) -> bool:
    ok = True
    for name, fn in CHECKS.items():
        try:
            echo(f"PASS {name}: {fn()}")
        except AssertionError as exc:
            ok = False
            echo(f"FAIL {name}: {exc}")
    return ok
