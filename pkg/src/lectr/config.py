"""Experiment configuration: nested dataclasses, INI files, CLI overrides."""

from __future__ import annotations

import ast
import configparser
import dataclasses
import hashlib
import json
from dataclasses import dataclass, field

from .heuristics import HeuristicKind
from .rewards import RewardKind


class ConfigError(ValueError):
    pass


# per-domain defaults: (task learner, Phase I episodes)
DOMAIN_DEFAULTS = {
    "repeated": ("tabular", 50),
    "hallway": ("tilecoded", 100),
    "room": ("tilecoded", 150),
}
DEFAULT_HORIZON = {"repeated": 5, "hallway": 15, "room": 60}


@dataclass
class EnvConfig:
    domain: str = "repeated"
    horizon: int | None = None
    # "x,y;x,y" for grids ("6;10" for the hallway); None keeps the default
    start_cells: str | None = None
    goal_cells: str | None = None
    # rotation (degrees) of agent j's action frame, room only
    rotation: int = 0
    flip: str = "none"


@dataclass
class LearnerConfig:
    kind: str | None = None
    alpha: float | None = None
    gamma: float = 0.95
    epsilon: float = 0.1
    # tie rule while exploring; greedy evaluation always takes the lowest index
    tie_break: str = "random"
    n_tilings: int = 4
    tile_width: float = 2.0


@dataclass
class AdvisingConfig:
    hidden: int = 32
    n_hidden: int = 3
    lr: float = 1e-3
    gamma: float = 0.99
    polyak: float = 0.01
    temperature: float = 1.0
    buffer_capacity: int = 100_000
    batch_size: int = 64
    updates_per_step: float = 1.0
    reservoir_capacity: int = 1000
    # entropy bonus on the actors' objective
    entropy: float = 0.1


@dataclass
class RewardConfig:
    kind: str = "VEG"
    cost: float = 0.0
    tau: float | None = None
    tau_fraction: float = 0.8
    tau_reference_seeds: int = 10
    veg_at: str = "next"
    jvg_rollouts: int = 10


@dataclass
class HeuristicConfig:
    threshold: float = 0.01
    budget: int = 100
    upsilon: float = 0.5
    expert_policy: str | None = None
    expert_episodes: int = 3000
    expert_epsilon: float = 0.2


@dataclass
class RunConfig:
    # "lectr", "none", or a heuristic name such as "importance_advising"
    algorithm: str = "lectr"
    episodes: int | None = None
    epochs: int = 10
    seed: int = 0
    seeds: int = 10
    eval_rollouts: int = 10
    out: str = "results"
    workers: int = 1
    label: str | None = None


SECTIONS = {
    "env": EnvConfig,
    "learner": LearnerConfig,
    "advising": AdvisingConfig,
    "reward": RewardConfig,
    "heuristic": HeuristicConfig,
    "run": RunConfig,
}


@dataclass
class ExperimentConfig:
    env: EnvConfig = field(default_factory=EnvConfig)
    learner: LearnerConfig = field(default_factory=LearnerConfig)
    advising: AdvisingConfig = field(default_factory=AdvisingConfig)
    reward: RewardConfig = field(default_factory=RewardConfig)
    heuristic: HeuristicConfig = field(default_factory=HeuristicConfig)
    run: RunConfig = field(default_factory=RunConfig)

    def __post_init__(self):
        self.validate()

    # derived values
    @property
    def learner_kind(self) -> str:
        return self.learner.kind or DOMAIN_DEFAULTS[self.env.domain][0]

    @property
    def episodes(self) -> int:
        e = self.run.episodes
        return DOMAIN_DEFAULTS[self.env.domain][1] if e is None else e

    @property
    def label(self) -> str:
        if self.run.label:
            return self.run.label
        if self.run.algorithm == "lectr":
            return f"lectr-{self.reward.kind.lower()}"
        return self.run.algorithm

    @property
    def seed_list(self) -> list[int]:
        return list(range(self.run.seed, self.run.seed + self.run.seeds))

    def validate(self) -> None:
        if self.env.domain not in DOMAIN_DEFAULTS:
            raise ConfigError(f"unknown domain {self.env.domain!r}")
        algo = self.run.algorithm
        if algo not in ("lectr", "none"):
            try:
                HeuristicKind(algo.upper())
            except ValueError:
                raise ConfigError(f"unknown algorithm {algo!r}") from None
        try:
            RewardKind(self.reward.kind.upper())
        except ValueError:
            raise ConfigError(f"unknown reward kind {self.reward.kind!r}") from None
        if self.reward.veg_at not in ("next", "post"):
            raise ConfigError("reward.veg_at must be 'next' or 'post'")
        if self.learner.tie_break not in ("first", "random"):
            raise ConfigError("learner.tie_break must be 'first' or 'random'")
        if self.env.flip not in ("none", "horizontal", "vertical"):
            raise ConfigError(f"unknown flip axis {self.env.flip!r}")
        if self.env.rotation % 90:
            raise ConfigError("env.rotation must be a multiple of 90")
        if self.env.rotation % 360 and self.env.domain != "room":
            raise ConfigError("action rotation needs the room domain")
        if self.run.epochs < 1 or self.episodes < 0 or self.run.seeds < 1:
            raise ConfigError("epochs and seeds must be positive, episodes non-negative")

    # serialisation
    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    def digest(self, *sections) -> str:
        d = self.to_dict()
        if sections:
            d = {k: d[k] for k in sections}
        return hashlib.sha1(json.dumps(d, sort_keys=True).encode()).hexdigest()[:12]

    def replace(self, **overrides) -> "ExperimentConfig":
        """Copy with dotted overrides, e.g. ``replace(**{"reward.cost": 0.5})``."""
        d = self.to_dict()
        for key, value in overrides.items():
            section, _, name = key.partition(".")
            if section not in d or name not in d[section]:
                raise ConfigError(f"unknown config key {key!r}")
            d[section][name] = value
        return from_dict(d)

    def write(self, path) -> None:
        cp = configparser.ConfigParser()
        for section, values in self.to_dict().items():
            cp[section] = {k: repr(v) for k, v in values.items()}
        with open(path, "w") as fh:
            cp.write(fh)


def _coerce(cls, name: str, raw):
    """Convert a text value to the field's type."""
    if not isinstance(raw, str):
        return raw
    ftype = {f.name: f.type for f in dataclasses.fields(cls)}[name]
    text = raw.strip()
    if text in ("None", "none", "") and "None" in str(ftype):
        return None
    try:
        if "int" in str(ftype) and "float" not in str(ftype):
            return int(text)
        if "float" in str(ftype):
            return float(text)
        if "bool" in str(ftype):
            return text.lower() in ("1", "true", "yes", "on")
    except ValueError:
        raise ConfigError(f"bad value {raw!r} for {cls.__name__}.{name}") from None
    if len(text) >= 2 and text[0] == text[-1] and text[0] in "'\"":
        return ast.literal_eval(text)
    return text


def from_dict(d: dict) -> ExperimentConfig:
    parts = {}
    for section, cls in SECTIONS.items():
        values = d.get(section, {}) or {}
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = set(values) - known
        if unknown:
            raise ConfigError(f"unknown keys in [{section}]: {sorted(unknown)}")
        parts[section] = cls(**{k: _coerce(cls, k, v) for k, v in values.items()})
    extra = set(d) - set(SECTIONS)
    if extra:
        raise ConfigError(f"unknown config sections: {sorted(extra)}")
    return ExperimentConfig(**parts)


def load(path) -> ExperimentConfig:
    cp = configparser.ConfigParser()
    try:
        with open(path) as fh:
            cp.read_file(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    except configparser.Error as exc:
        raise ConfigError(f"malformed config {path}: {exc}") from None
    return from_dict({s: dict(cp[s]) for s in cp.sections()})


def parse_cells(text: str | None):
    """'6;10' -> ((6, 0), (10, 0)); '6,2;10,2' -> ((6, 2), (10, 2))."""
    if text is None:
        return None
    cells = []
    for part in text.split(";"):
        nums = tuple(int(v) for v in part.split(","))
        cells.append(nums if len(nums) == 2 else (nums[0], 0))
    if len(cells) != 2:
        raise ConfigError(f"expected two cells, got {text!r}")
    return tuple(cells)
