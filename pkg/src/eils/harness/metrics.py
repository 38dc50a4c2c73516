"""Recovery, success, coverage and reversal-speed metrics."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from eils.harness.records import RunRecord, by_seed

RECOVERY_THRESHOLD = 195.0
RECOVERY_WINDOW = 100
SUCCESS_WINDOW = 100
REVERSAL_WINDOW = 50


def _first_window_crossing(
    returns: Sequence[float], change: int, window: int, passes
) -> int | None:
    """Episodes from ``change`` to the end of the first fully post-change window that passes."""
    r = np.asarray(returns, dtype=np.float64)
    if change >= len(r) or change < 0:
        raise ValueError(f"change episode {change} outside the recorded range 0..{len(r) - 1}")
    post = r[change:]
    if len(post) < window:
        return None
    csum = np.concatenate([[0.0], np.cumsum(post)])
    means = (csum[window:] - csum[:-window]) / window
    hits = np.flatnonzero(passes(means))
    if len(hits) == 0:
        return None
    # window k covers post-change episodes k..k+window-1
    return int(hits[0]) + window


def recovery_time(
    returns: Sequence[float],
    shift_episode: int,
    threshold: float = RECOVERY_THRESHOLD,
    window: int = RECOVERY_WINDOW,
) -> int | None:
    """Episodes after the shift until the trailing ``window`` mean first reaches ``threshold``.

    ``returns[i]`` is the return of episode ``i``. The window must lie
    entirely after the shift, so the fastest possible recovery is ``window``.
    ``None`` means not recovered.
    """
    return _first_window_crossing(returns, shift_episode, window, lambda m: m >= threshold - 1e-9)


def reversal_speed(returns: Sequence[float], flip_episode: int, window: int = REVERSAL_WINDOW) -> int | None:
    """Episodes after the rule flip until the trailing ``window`` mean return turns positive."""
    return _first_window_crossing(returns, flip_episode, window, lambda m: m > 0.0)


def coverage(visited: Iterable[tuple[int, int]], open_cells: int, walls: Iterable[tuple[int, int]] = ()) -> float:
    """Percentage of open (non-wall) cells in ``visited``."""
    wall_set = set(walls)
    cells = {tuple(c) for c in visited} - wall_set
    return 100.0 * len(cells) / open_cells


@dataclass(frozen=True)
class RateStats:
    mean: float
    std: float
    per_seed: tuple[float, ...]
    short_window: bool = False


def mean_std(values: Sequence[float]) -> tuple[float, float]:
    """Mean and population std; NaN for an empty sequence."""
    if len(values) == 0:
        return float("nan"), float("nan")
    arr = np.asarray(values, dtype=np.float64)
    return float(arr.mean()), float(arr.std())


def _seed_success(recs: list[RunRecord], env: str, change: int | None) -> tuple[float, bool]:
    rets = np.array([r.ret for r in recs])
    if env == "dynamic-cartpole":
        start = change if change is not None and change < len(rets) else 0
        window = rets[start:]
        return 100.0 * float(np.mean(window >= RECOVERY_THRESHOLD)), False
    window = rets[-SUCCESS_WINDOW:]
    short = len(rets) < SUCCESS_WINDOW
    # maze: goal reached (+1); reversal: rewarding key collected (return > 0)
    return 100.0 * float(np.mean(window > 0.0)), short


def success_rate(records: list[RunRecord], env: str, change: int | None = None) -> RateStats:
    """Success percentage per seed, summarized as mean ± population std across seeds.

    Maze: final-100 episodes that reach the goal. CartPole: post-shift
    episodes with return >= 195. Reversal: final-100 episodes with positive
    return. ``short_window`` flags runs shorter than the final window.
    """
    per_seed, short = [], False
    for recs in by_seed(records).values():
        rate, s = _seed_success(recs, env, change)
        per_seed.append(rate)
        short |= s
    m, sd = mean_std(per_seed)
    return RateStats(m, sd, tuple(per_seed), short)


@dataclass
class MetricsSummary:
    env: str
    agent: str
    seeds: tuple[int, ...]
    episodes: int
    success: RateStats
    recovery: dict[int, int | None] = field(default_factory=dict)
    coverage: RateStats | None = None
    reversal: dict[int, int | None] = field(default_factory=dict)
    complete: bool = True

    @staticmethod
    def _median(times: dict[int, int | None]) -> float | None:
        if not times:
            return None
        vals = [np.inf if t is None else t for t in times.values()]
        med = float(np.median(vals))
        return None if np.isinf(med) else med

    @property
    def recovered(self) -> int:
        return sum(t is not None for t in self.recovery.values())

    @property
    def recovery_median(self) -> float | None:
        return self._median(self.recovery)

    @property
    def reversal_median(self) -> float | None:
        return self._median(self.reversal)


def summarize(
    records: list[RunRecord],
    env: str,
    agent: str,
    change: int | None = None,
    expected_episodes: int | None = None,
) -> MetricsSummary:
    groups = by_seed(records)
    lengths = {len(v) for v in groups.values()}
    episodes = max(lengths) if lengths else 0
    complete = bool(groups) and len(lengths) == 1
    if expected_episodes is not None:
        complete = complete and episodes == expected_episodes
    summary = MetricsSummary(env, agent, tuple(groups), episodes, success_rate(records, env, change), complete=complete)
    for seed, recs in groups.items():
        rets = [r.ret for r in recs]
        if env == "dynamic-cartpole" and change is not None and change < len(rets):
            summary.recovery[seed] = recovery_time(rets, change)
        if env == "reversal" and change is not None and change < len(rets):
            summary.reversal[seed] = reversal_speed(rets, change)
    if env == "sparse-maze":
        finals = [recs[-1].coverage for recs in groups.values()]
        m, sd = mean_std(finals)
        summary.coverage = RateStats(m, sd, tuple(finals))
    return summary
