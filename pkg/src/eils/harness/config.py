"""Experiment configuration and its INI-style file format.

Sections mirror the modules: ``[experiment]``, ``[ppo]``, ``[ism]``,
``[modulation]``, ``[cartpole]``, ``[maze]``, ``[reversal]``. Every key is
optional and overrides the dataclass default of the same name.
"""

from __future__ import annotations

import configparser
import dataclasses
from dataclasses import dataclass, field
from pathlib import Path

from eils.envs import ENV_NAMES, CartPoleConfig, MazeConfig, ReversalConfig, load_walls
from eils.ism import IsmConfig
from eils.modulation import ModulationConfig
from eils.ppo import PpoConfig

AGENTS = ("ppo", "eils", "eils-ablated")
AGENT_ALIASES = {"ppo-baseline": "ppo", "eils-full": "eils"}


class ConfigError(ValueError):
    """Invalid experiment configuration (CLI exit code 1)."""


def canonical_agent(name: str) -> str:
    name = AGENT_ALIASES.get(name, name)
    if name not in AGENTS:
        raise ConfigError(f"unknown agent {name!r}; expected one of {AGENTS}")
    return name


@dataclass(frozen=True)
class ExperimentConfig:
    env: str = "dynamic-cartpole"
    agent: str = "eils"
    episodes: int = 1000
    seeds: tuple[int, ...] = (0, 1, 2, 3, 4)
    out_dir: str = "runs"
    workers: int = 1
    # baseline arm: linear lr decay from lr_base to lr_final over this many episodes, then held
    lr_decay_episodes: int = 500
    lr_final: float = 1e-5
    baseline_entropy: float = 0.01
    ppo: PpoConfig = field(default_factory=PpoConfig)
    ism: IsmConfig = field(default_factory=IsmConfig)
    modulation: ModulationConfig = field(default_factory=ModulationConfig)
    cartpole: CartPoleConfig = field(default_factory=CartPoleConfig)
    maze: MazeConfig = field(default_factory=MazeConfig)
    reversal: ReversalConfig = field(default_factory=ReversalConfig)

    def __post_init__(self) -> None:
        if self.env not in ENV_NAMES:
            raise ConfigError(f"unknown environment {self.env!r}; expected one of {ENV_NAMES}")
        object.__setattr__(self, "agent", canonical_agent(self.agent))
        object.__setattr__(self, "seeds", tuple(int(s) for s in self.seeds))
        if self.episodes < 1:
            raise ConfigError("episode count must be >= 1")
        if not self.seeds:
            raise ConfigError("seed list must be non-empty")
        if len(set(self.seeds)) != len(self.seeds):
            raise ConfigError("seeds must be distinct")
        if self.workers < 1 or self.lr_decay_episodes < 1:
            raise ConfigError("workers and lr_decay_episodes must be >= 1")

    def env_config(self):
        return {"dynamic-cartpole": self.cartpole, "sparse-maze": self.maze, "reversal": self.reversal}[self.env]

    def modulation_for_agent(self) -> ModulationConfig:
        if self.agent == "eils-ablated":
            return dataclasses.replace(self.modulation, disable_stress=True)
        return self.modulation

    def change_episode(self) -> int | None:
        """Episode of the silent environment change, if the environment has one."""
        if self.env == "dynamic-cartpole":
            return self.cartpole.shift_episode
        if self.env == "reversal":
            return self.reversal.flip_episode
        return None


_SECTIONS = {
    "ppo": PpoConfig,
    "ism": IsmConfig,
    "modulation": ModulationConfig,
    "cartpole": CartPoleConfig,
    "maze": MazeConfig,
    "reversal": ReversalConfig,
}
_TOP_LEVEL = ("env", "agent", "episodes", "seeds", "out_dir", "workers", "lr_decay_episodes", "lr_final", "baseline_entropy")


def _parse_value(raw: str, current):
    raw = raw.strip()
    if isinstance(current, bool):
        low = raw.lower()
        if low in ("1", "true", "yes", "on"):
            return True
        if low in ("0", "false", "no", "off"):
            return False
        raise ValueError(f"not a boolean: {raw!r}")
    if isinstance(current, int):
        return int(raw)
    if isinstance(current, float):
        return float(raw)
    if isinstance(current, frozenset):
        pairs = [p.split(",") for p in raw.split(";") if p.strip()]
        return frozenset((int(a), int(b)) for a, b in pairs)
    if isinstance(current, tuple):
        parts = [p.strip() for p in raw.split(",") if p.strip()]
        return tuple(int(p) for p in parts)
    if current is None:
        # only optional floats use None defaults
        return None if raw.lower() in ("", "none", "auto") else float(raw)
    return raw


def _apply(obj, section: configparser.SectionProxy, name: str):
    kwargs = {}
    known = {f.name for f in dataclasses.fields(obj)}
    for key, raw in section.items():
        if key == "walls_file" and name == "maze":
            kwargs["walls"] = load_walls(raw.strip())
            continue
        if key not in known:
            raise ConfigError(f"[{name}] unknown key {key!r}")
        try:
            kwargs[key] = _parse_value(raw, getattr(obj, key))
        except ValueError as exc:
            raise ConfigError(f"[{name}] {key}: {exc}") from exc
    try:
        return dataclasses.replace(obj, **kwargs)
    except (ValueError, TypeError) as exc:
        raise ConfigError(f"[{name}] {exc}") from exc


def load_config(path: str | Path | None = None, **overrides) -> ExperimentConfig:
    """Build a config from an optional INI file, then apply keyword overrides."""
    parser = configparser.ConfigParser()
    if path is not None:
        if not Path(path).is_file():
            raise ConfigError(f"config file not found: {path}")
        try:
            parser.read(path)
        except configparser.Error as exc:
            raise ConfigError(f"{path}: {exc}") from exc
    unknown = set(parser.sections()) - set(_SECTIONS) - {"experiment"}
    if unknown:
        raise ConfigError(f"unknown config sections: {sorted(unknown)}")

    kwargs: dict = {}
    for name, cls in _SECTIONS.items():
        base = cls()
        kwargs[name] = _apply(base, parser[name], name) if parser.has_section(name) else base
    if parser.has_section("experiment"):
        defaults = ExperimentConfig()
        for key, raw in parser["experiment"].items():
            if key not in _TOP_LEVEL:
                raise ConfigError(f"[experiment] unknown key {key!r}")
            try:
                kwargs[key] = _parse_value(raw, getattr(defaults, key))
            except ValueError as exc:
                raise ConfigError(f"[experiment] {key}: {exc}") from exc
    kwargs.update({k: v for k, v in overrides.items() if v is not None})
    try:
        return ExperimentConfig(**kwargs)
    except ConfigError:
        raise
    except (ValueError, TypeError) as exc:
        raise ConfigError(str(exc)) from exc


def _format(value) -> str:
    if isinstance(value, tuple):
        if value and isinstance(value[0], tuple):
            return ";".join(f"{a},{b}" for a, b in value)
        return ",".join(str(v) for v in value)
    if isinstance(value, frozenset):
        return ";".join(f"{a},{b}" for a, b in sorted(value))
    if isinstance(value, float):
        return repr(value)
    return str(value)


def dump_config(cfg: ExperimentConfig, path: str | Path) -> None:
    """Echo the full resolved configuration for provenance."""
    parser = configparser.ConfigParser()
    parser["experiment"] = {k: _format(getattr(cfg, k)) for k in _TOP_LEVEL}
    for name in _SECTIONS:
        sub = getattr(cfg, name)
        parser[name] = {f.name: _format(getattr(sub, f.name)) for f in dataclasses.fields(sub)}
    with open(path, "w") as fh:
        parser.write(fh)
