"""The training loop: collect a rollout, run the ISM over it step by step,
modulate, then update PPO and the forward model.
"""

from __future__ import annotations

import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable

import numpy as np

from eils.dynamics import DynamicsModel, curiosity_impulse, train_dynamics
from eils.envs import make_env
from eils.harness.config import ExperimentConfig, dump_config
from eils.harness.metrics import MetricsSummary, summarize
from eils.harness.records import RunRecord, emit_csv
from eils.ism import InternalStateModule
from eils.modulation import HyperparamSet, modulate
from eils.nn import NonFiniteError, OptimizerState
from eils.ppo import AgentNets, RolloutBuffer, Transition, compute_gae, linear_decay, ppo_update

log = logging.getLogger(__name__)

Hook = Callable[[str], None]


class NumericFailure(RuntimeError):
    """Training produced non-finite parameters or values (CLI exit code 2)."""


@dataclass
class SeedResult:
    seed: int
    records: list[RunRecord]
    visits: np.ndarray | None = None
    skipped_updates: int = 0
    updates: int = 0
    agent: AgentNets | None = None
    dynamics: DynamicsModel | None = None


@dataclass
class _EpisodeAcc:
    ret: float = 0.0
    length: int = 0
    sums: np.ndarray = field(default_factory=lambda: np.zeros(7))
    processed: int = 0
    phase: int = 1
    coverage: float = 0.0


def baseline_hparams(cfg: ExperimentConfig, episode: int) -> HyperparamSet:
    lr = linear_decay(cfg.ppo.lr_base, cfg.lr_final, episode / cfg.lr_decay_episodes)
    return HyperparamSet(lr, cfg.baseline_entropy, cfg.ppo.clip_base)


def run_seed(cfg: ExperimentConfig, seed: int, hook: Hook | None = None) -> SeedResult:
    """Train one agent for ``cfg.episodes`` episodes; deterministic in ``seed``."""
    emit = hook or (lambda _event: None)
    root = np.random.default_rng(seed)
    net_rng, dyn_rng, act_rng, upd_rng, env_rng = root.spawn(5)
    env = make_env(cfg.env, cfg.env_config())
    agent = AgentNets.create(env.obs_dim, env.n_actions, net_rng)
    opt = OptimizerState.for_net(agent.net)
    dyn = DynamicsModel.create(env.obs_dim, env.n_actions, dyn_rng)
    ism = InternalStateModule(cfg.ism)
    mod_cfg = cfg.modulation_for_agent()
    is_baseline = cfg.agent == "ppo"

    grid = getattr(env, "cfg", None)
    is_grid = cfg.env in ("sparse-maze", "reversal")
    if cfg.env == "sparse-maze":
        shape, open_cells = (grid.width, grid.height), grid.open_cells
    elif cfg.env == "reversal":
        shape, open_cells = (grid.size, grid.size), grid.size * grid.size
    visits = np.zeros(shape, dtype=np.int64) if is_grid else None
    seen: set = set()

    buffer = RolloutBuffer()
    step_episode: list[int] = []
    accs: dict[int, _EpisodeAcc] = {}
    records: list[RunRecord] = []
    result = SeedResult(seed, records, visits, agent=agent, dynamics=dyn)

    episode = 0
    env.set_episode(0)
    obs = env.reset(seed=int(env_rng.integers(2**31)))
    accs[0] = _EpisodeAcc(phase=env.phase)
    if is_grid:
        visits[env.cell] += 1
        seen.add(env.cell)

    while episode < cfg.episodes:
        a, logp, v = agent.act(obs, act_rng)
        next_obs, r, done, info = env.step(a)
        if buffer.transitions and not buffer.transitions[-1].done:
            buffer.transitions[-1].next_value = v
        t = Transition(obs, a, r, next_obs, done, logp, v, terminated=info["terminated"])
        if info["truncated"]:
            t.next_value = agent.value(next_obs)
        buffer.add(t)
        step_episode.append(episode)
        acc = accs[episode]
        acc.ret += r
        acc.length += 1
        if is_grid:
            visits[env.cell] += 1
            seen.add(env.cell)
            acc.coverage = 100.0 * len(seen) / open_cells

        if done:
            episode += 1
            if episode < cfg.episodes:
                env.set_episode(episode)
                obs = env.reset()
                accs[episode] = _EpisodeAcc(phase=env.phase)
                if is_grid:
                    visits[env.cell] += 1
                    seen.add(env.cell)
                    accs[episode].coverage = 100.0 * len(seen) / open_cells
        else:
            obs = next_obs

        finished = episode >= cfg.episodes
        if len(buffer) < cfg.ppo.batch_size and not finished:
            continue

        last = buffer.transitions[-1]
        if not last.done:
            last.next_value = agent.value(last.next_obs)
        hp_k = _process_rollout(cfg, buffer, step_episode, accs, records, seed, dyn, ism, mod_cfg, is_baseline, emit)
        if len(buffer) == cfg.ppo.batch_size:
            _update(cfg, agent, opt, dyn, buffer, hp_k, upd_rng, result, emit)
        buffer.clear()
        step_episode.clear()

    return result


def _process_rollout(cfg, buffer, step_episode, accs, records, seed, dyn, ism, mod_cfg, is_baseline, emit) -> HyperparamSet:
    """Per-step TD and dynamics errors, ISM step and modulation, in collection order."""
    deltas = buffer.td_errors(cfg.ppo.gamma)
    obs = np.stack(buffer.column("obs"))
    nxt = np.stack(buffer.column("next_obs"))
    impulses = curiosity_impulse(dyn, obs, buffer.column("action"), nxt)
    values = buffer.column("value")
    if not (np.all(np.isfinite(deltas)) and np.all(np.isfinite(impulses))):
        raise NumericFailure("non-finite TD error or curiosity impulse")
    hp = None
    for i, ep in enumerate(step_episode):
        state = ism.step(float(deltas[i]), float(impulses[i]), float(values[i]))
        emit("ism_step")
        if is_baseline:
            hp = baseline_hparams(cfg, ep)
        else:
            hp = modulate(state, ism.kappa_set, mod_cfg)
        emit("modulate")
        acc = accs[ep]
        acc.sums += (state.sigma, state.kappa, state.phi, hp.lr, hp.entropy_coef, hp.clip, ism.deficit())
        acc.processed += 1
        if buffer.transitions[i].done:
            m = acc.sums / acc.processed
            records.append(RunRecord(
                seed, ep, acc.ret, acc.length,
                float(m[0]), float(m[1]), float(m[2]), float(m[3]), float(m[4]), float(m[5]), float(m[6]),
                acc.coverage, acc.phase,
            ))
            del accs[ep]
    return hp


def _update(cfg, agent, opt, dyn, buffer, hp, rng, result: SeedResult, emit) -> None:
    obs = np.stack(buffer.column("obs"))
    actions = buffer.column("action")
    nxt = np.stack(buffer.column("next_obs"))
    compute_gae(buffer, cfg.ppo.gamma, cfg.ppo.gae_lambda)
    result.updates += 1
    try:
        ppo_update(agent, opt, buffer, hp, cfg.ppo, rng)
        emit("ppo_update")
    except NonFiniteError as exc:
        result.skipped_updates += 1
        log.warning("seed %d: PPO update skipped: %s", result.seed, exc)
    try:
        train_dynamics(dyn, obs, actions, nxt, rng)
        emit("dynamics_update")
    except NonFiniteError as exc:
        result.skipped_updates += 1
        log.warning("seed %d: dynamics update skipped: %s", result.seed, exc)
    if not all(np.all(np.isfinite(p)) for p in agent.net.params()):
        raise NumericFailure(f"seed {result.seed}: agent parameters became non-finite")


@dataclass
class ExperimentResult:
    records: list[RunRecord]
    summary: MetricsSummary
    visits: np.ndarray | None
    csv_path: Path | None = None


def records_path(out_dir: str | Path, env: str, agent: str) -> Path:
    return Path(out_dir) / f"records_{env}_{agent}.csv"


def echo_path(out_dir: str | Path, env: str, agent: str) -> Path:
    return Path(out_dir) / f"config_echo_{env}_{agent}.ini"


def visits_path(out_dir: str | Path, env: str, agent: str) -> Path:
    return Path(out_dir) / f"visits_{env}_{agent}.csv"


def _run_seed_job(args) -> SeedResult:
    cfg, seed = args
    return run_seed(cfg, seed)


def run_experiment(cfg: ExperimentConfig, write: bool = True) -> ExperimentResult:
    """Run every seed (fanned out over ``cfg.workers`` processes), merge, summarize and write outputs."""
    jobs = [(cfg, s) for s in cfg.seeds]
    if cfg.workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=min(cfg.workers, len(jobs))) as pool:
            results = list(pool.map(_run_seed_job, jobs))
    else:
        results = [_run_seed_job(j) for j in jobs]

    records = [rec for res in results for rec in res.records]
    if len(records) != len(cfg.seeds) * cfg.episodes:
        raise RuntimeError(f"expected {len(cfg.seeds) * cfg.episodes} records, got {len(records)}")
    visits = None
    if results[0].visits is not None:
        visits = sum(res.visits for res in results)
    skipped = sum(r.skipped_updates for r in results)
    if skipped:
        log.warning("%s/%s: %d updates skipped for non-finite values", cfg.env, cfg.agent, skipped)

    summary = summarize(records, cfg.env, cfg.agent, cfg.change_episode(), cfg.episodes)
    result = ExperimentResult(records, summary, visits)
    if write:
        out = Path(cfg.out_dir)
        out.mkdir(parents=True, exist_ok=True)
        result.csv_path = emit_csv(records, records_path(out, cfg.env, cfg.agent))
        dump_config(cfg, out / "config_echo.ini")
        # per-arm copy so `compare` can recover each arm's change episode
        dump_config(cfg, echo_path(out, cfg.env, cfg.agent))
        if visits is not None:
            write_visits(visits, visits_path(out, cfg.env, cfg.agent))
    return result


def write_visits(visits: np.ndarray, path: str | Path) -> None:
    with open(path, "w") as fh:
        fh.write("x,y,count\n")
        for (x, y), c in np.ndenumerate(visits):
            fh.write(f"{x},{y},{c}\n")


def read_visits(path: str | Path) -> np.ndarray:
    rows = np.loadtxt(path, delimiter=",", skiprows=1, dtype=np.int64, ndmin=2)
    grid = np.zeros((rows[:, 0].max() + 1, rows[:, 1].max() + 1), dtype=np.int64)
    grid[rows[:, 0], rows[:, 1]] = rows[:, 2]
    return grid
