"""Benchmark environments: Dynamic CartPole, Sparse Maze and the key/door
reversal task.

Each environment exposes ``reset(seed=None) -> obs`` and
``step(action) -> (obs, reward, done, info)`` where ``info`` separates
``terminated`` (a true terminal state) from ``truncated`` (episode cap).
``set_episode(k)`` tells the environment which episode is about to start so
it can apply the silent physics shift or the reward flip; nothing about the
change leaks into the observation.
"""

from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

Cell = tuple[int, int]

# ---------------------------------------------------------------------------
# CartPole
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class CartPoleConfig:
    gravity: float = 9.8
    pole_mass: float = 0.1
    cart_mass: float = 1.0
    pole_half_length: float = 0.5
    force_magnitude: float = 10.0
    timestep: float = 0.02
    angle_limit: float = 12 * 2 * math.pi / 360
    position_limit: float = 2.4
    max_steps: int = 200
    shift_episode: int = 500
    shifted_gravity: float = 30.0
    shifted_pole_mass: float = 0.2

    def __post_init__(self) -> None:
        physical = (
            self.gravity, self.pole_mass, self.cart_mass, self.pole_half_length,
            self.force_magnitude, self.timestep, self.angle_limit, self.position_limit,
            self.shifted_gravity, self.shifted_pole_mass,
        )
        if any(not q > 0 for q in physical):
            raise ValueError("CartPole physical quantities must be positive")
        if self.shift_episode < 0 or self.max_steps < 1:
            raise ValueError("shift_episode must be >= 0 and max_steps >= 1")


def apply_phase_shift(cfg: CartPoleConfig, episode: int) -> CartPoleConfig:
    if episode < 0:
        raise ValueError("episode must be non-negative")
    if episode >= cfg.shift_episode:
        return replace(cfg, gravity=cfg.shifted_gravity, pole_mass=cfg.shifted_pole_mass)
    return cfg


def cartpole_in_bounds(state: np.ndarray, cfg: CartPoleConfig) -> bool:
    return abs(state[2]) < cfg.angle_limit and abs(state[0]) < cfg.position_limit


def cartpole_step(state: np.ndarray, action: int, cfg: CartPoleConfig) -> tuple[np.ndarray, float, bool]:
    """One semi-implicit Euler step of the classic cart-pole.

    A state already outside the limits terminates immediately with zero
    reward. Otherwise the step earns 1.0 and is terminal if the *next* state
    leaves the limits. The episode cap is handled by the environment.
    """
    x, x_dot, theta, theta_dot = (float(v) for v in state)
    if not cartpole_in_bounds(state, cfg):
        return np.array([x, x_dot, theta, theta_dot]), 0.0, True

    force = cfg.force_magnitude if action == 1 else -cfg.force_magnitude
    total_mass = cfg.cart_mass + cfg.pole_mass
    pm_len = cfg.pole_mass * cfg.pole_half_length
    cos_t, sin_t = math.cos(theta), math.sin(theta)

    temp = (force + pm_len * theta_dot * theta_dot * sin_t) / total_mass
    theta_acc = (cfg.gravity * sin_t - cos_t * temp) / (
        cfg.pole_half_length * (4.0 / 3.0 - cfg.pole_mass * cos_t * cos_t / total_mass)
    )
    x_acc = temp - pm_len * theta_acc * cos_t / total_mass

    x_dot += cfg.timestep * x_acc
    x += cfg.timestep * x_dot
    theta_dot += cfg.timestep * theta_acc
    theta += cfg.timestep * theta_dot

    nxt = np.array([x, x_dot, theta, theta_dot])
    return nxt, 1.0, not cartpole_in_bounds(nxt, cfg)


class CartPoleEnv:
    obs_dim = 4
    n_actions = 2
    name = "dynamic-cartpole"

    def __init__(self, cfg: CartPoleConfig | None = None, seed: int | None = None):
        self.base_cfg = cfg or CartPoleConfig()
        self.cfg = self.base_cfg
        self.rng = np.random.default_rng(seed)
        self.state = np.zeros(4)
        self.steps = 0
        self.phase = 1

    @property
    def max_steps(self) -> int:
        return self.base_cfg.max_steps

    def set_episode(self, episode: int) -> None:
        self.cfg = apply_phase_shift(self.base_cfg, episode)
        self.phase = 2 if episode >= self.base_cfg.shift_episode else 1

    def reset(self, seed: int | None = None) -> np.ndarray:
        if seed is not None:
            self.rng = np.random.default_rng(seed)
        self.state = self.rng.uniform(-0.05, 0.05, size=4)
        self.steps = 0
        return self.state.copy()

    def step(self, action: int) -> tuple[np.ndarray, float, bool, dict]:
        self.state, reward, terminated = cartpole_step(self.state, action, self.cfg)
        self.steps += 1
        truncated = not terminated and self.steps >= self.max_steps
        return self.state.copy(), reward, terminated or truncated, {
            "terminated": terminated,
            "truncated": truncated,
        }


# ---------------------------------------------------------------------------
# Sparse Maze
# ---------------------------------------------------------------------------

# up, down, left, right
MOVES: tuple[Cell, ...] = ((0, 1), (0, -1), (-1, 0), (1, 0))


def load_walls(path: str | Path) -> frozenset[Cell]:
    """Read a wall file: one ``x,y`` integer pair per line, 0-indexed. Blank lines and ``#`` comments skipped."""
    walls = set()
    for lineno, line in enumerate(Path(path).read_text().splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        try:
            xs, ys = line.split(",")
            walls.add((int(xs), int(ys)))
        except ValueError as exc:
            raise ValueError(f"{path}:{lineno}: expected 'x,y', got {line!r}") from exc
    return frozenset(walls)


def _reachable(width: int, height: int, walls: frozenset[Cell], start: Cell) -> set[Cell]:
    seen = {start}
    queue = deque([start])
    while queue:
        x, y = queue.popleft()
        for dx, dy in MOVES:
            nxt = (x + dx, y + dy)
            if 0 <= nxt[0] < width and 0 <= nxt[1] < height and nxt not in walls and nxt not in seen:
                seen.add(nxt)
                queue.append(nxt)
    return seen


@dataclass(frozen=True)
class MazeConfig:
    width: int = 20
    height: int = 20
    start: Cell = (0, 0)
    goal: Cell = (19, 19)
    walls: frozenset[Cell] = field(default_factory=frozenset)
    max_steps: int = 400

    def __post_init__(self) -> None:
        object.__setattr__(self, "walls", frozenset(tuple(w) for w in self.walls))
        object.__setattr__(self, "start", tuple(self.start))
        object.__setattr__(self, "goal", tuple(self.goal))
        for name, c in (("start", self.start), ("goal", self.goal)):
            if not (0 <= c[0] < self.width and 0 <= c[1] < self.height):
                raise ValueError(f"{name} {c} outside {self.width}x{self.height} grid")
            if c in self.walls:
                raise ValueError(f"{name} {c} is a wall")
        if self.start == self.goal:
            raise ValueError("start and goal must differ")
        if self.goal not in _reachable(self.width, self.height, self.walls, self.start):
            raise ValueError("goal is not reachable from start")

    @property
    def open_cells(self) -> int:
        return self.width * self.height - sum(
            1 for (x, y) in self.walls if 0 <= x < self.width and 0 <= y < self.height
        )


def _grid_move(cell: Cell, action: int, width: int, height: int, walls: frozenset[Cell]) -> Cell:
    dx, dy = MOVES[action]
    nxt = (cell[0] + dx, cell[1] + dy)
    if not (0 <= nxt[0] < width and 0 <= nxt[1] < height) or nxt in walls:
        return cell
    return nxt


def maze_step(cell: Cell, action: int, cfg: MazeConfig) -> tuple[Cell, float, bool]:
    nxt = _grid_move(cell, action, cfg.width, cfg.height, cfg.walls)
    if nxt == cfg.goal:
        return nxt, 1.0, True
    return nxt, 0.0, False


def _normalize(cell: Cell, width: int, height: int) -> np.ndarray:
    return np.array([cell[0] / (width - 1), cell[1] / (height - 1)])


class MazeEnv:
    obs_dim = 2
    n_actions = 4
    name = "sparse-maze"

    def __init__(self, cfg: MazeConfig | None = None, seed: int | None = None):
        self.cfg = cfg or MazeConfig()
        self.cell: Cell = self.cfg.start
        self.steps = 0
        self.phase = 1

    @property
    def max_steps(self) -> int:
        return self.cfg.max_steps

    def set_episode(self, episode: int) -> None:
        pass

    def observe(self) -> np.ndarray:
        return _normalize(self.cell, self.cfg.width, self.cfg.height)

    def reset(self, seed: int | None = None) -> np.ndarray:
        self.cell = self.cfg.start
        self.steps = 0
        return self.observe()

    def step(self, action: int) -> tuple[np.ndarray, float, bool, dict]:
        self.cell, reward, terminated = maze_step(self.cell, action, self.cfg)
        self.steps += 1
        truncated = not terminated and self.steps >= self.max_steps
        return self.observe(), reward, terminated or truncated, {
            "terminated": terminated,
            "truncated": truncated,
        }


# ---------------------------------------------------------------------------
# Key/door reversal
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ReversalConfig:
    size: int = 10
    start: Cell = (0, 0)
    red_key: Cell = (0, 9)
    blue_key: Cell = (9, 0)
    door: Cell = (9, 9)
    red_reward: float = 10.0
    blue_reward: float = -1.0
    flip_episode: int = 300
    max_steps: int = 100

    def __post_init__(self) -> None:
        cells = [self.start, self.red_key, self.blue_key, self.door]
        if len(set(cells)) != len(cells):
            raise ValueError("start, keys and door must be distinct cells")
        for c in cells:
            if not (0 <= c[0] < self.size and 0 <= c[1] < self.size):
                raise ValueError(f"cell {c} outside {self.size}x{self.size} grid")
        if self.flip_episode < 0:
            raise ValueError("flip_episode must be non-negative")

    def reward_table(self, phase: int) -> dict[str, float]:
        if phase == 1:
            return {"red": self.red_reward, "blue": self.blue_reward}
        if phase == 2:
            return {"red": self.blue_reward, "blue": self.red_reward}
        raise ValueError(f"phase must be 1 or 2, got {phase}")


@dataclass(frozen=True)
class ReversalState:
    cell: Cell
    has_red: bool = False
    has_blue: bool = False

    def observe(self, cfg: ReversalConfig) -> np.ndarray:
        x, y = _normalize(self.cell, cfg.size, cfg.size)
        return np.array([
            x, y,
            float(self.has_red), float(self.has_blue),
            float(not self.has_red), float(not self.has_blue),
        ])


def reversal_step(
    state: ReversalState, action: int, cfg: ReversalConfig, phase: int
) -> tuple[ReversalState, float, bool]:
    """Move one cell; stepping onto an uncollected key collects it for its phase reward.

    Keys do not respawn within an episode. Reaching the door ends the episode
    with no reward of its own.
    """
    table = cfg.reward_table(phase)
    cell = _grid_move(state.cell, action, cfg.size, cfg.size, frozenset())
    reward = 0.0
    has_red, has_blue = state.has_red, state.has_blue
    if cell == cfg.red_key and not has_red:
        has_red, reward = True, table["red"]
    elif cell == cfg.blue_key and not has_blue:
        has_blue, reward = True, table["blue"]
    return ReversalState(cell, has_red, has_blue), reward, cell == cfg.door


class ReversalEnv:
    obs_dim = 6
    n_actions = 4
    name = "reversal"

    def __init__(self, cfg: ReversalConfig | None = None, seed: int | None = None):
        self.cfg = cfg or ReversalConfig()
        self.state = ReversalState(self.cfg.start)
        self.steps = 0
        self.phase = 1

    @property
    def max_steps(self) -> int:
        return self.cfg.max_steps

    @property
    def cell(self) -> Cell:
        return self.state.cell

    def set_episode(self, episode: int) -> None:
        self.phase = 2 if episode >= self.cfg.flip_episode else 1

    def reset(self, seed: int | None = None) -> np.ndarray:
        self.state = ReversalState(self.cfg.start)
        self.steps = 0
        return self.state.observe(self.cfg)

    def step(self, action: int) -> tuple[np.ndarray, float, bool, dict]:
        self.state, reward, terminated = reversal_step(self.state, action, self.cfg, self.phase)
        self.steps += 1
        truncated = not terminated and self.steps >= self.max_steps
        return self.state.observe(self.cfg), reward, terminated or truncated, {
            "terminated": terminated,
            "truncated": truncated,
        }


ENV_NAMES = ("dynamic-cartpole", "sparse-maze", "reversal")


def make_env(name: str, cfg=None, seed: int | None = None):
    if name == "dynamic-cartpole":
        return CartPoleEnv(cfg, seed)
    if name == "sparse-maze":
        return MazeEnv(cfg, seed)
    if name == "reversal":
        return ReversalEnv(cfg, seed)
    raise ValueError(f"unknown environment {name!r}; expected one of {ENV_NAMES}")
