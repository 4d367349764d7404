"""Experiment configuration and its flat ``key = value`` file format."""
from __future__ import annotations

import dataclasses
import hashlib
import json
from dataclasses import dataclass, field, fields
from pathlib import Path

from .env import EnvConfig

STRATEGIES = ("uniform", "countbased", "skewfit")
CLUSTER_SAMPLING = ("alp", "uniform-ablation")


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class ExperimentConfig:
    strategy: str = "countbased"
    wrap_grimgep: bool = False
    cluster_sampling: str = "alp"
    alpha: float = -1.0
    T: float = 5.0
    l: int = 50
    d: int = 8
    candidate_ks: tuple = (1, 3, 5, 7, 9, 11, 13, 15, 17, 19)
    eps_reg: float = 1e-6
    n_epochs: int = 1000
    goals_per_epoch: int = 10
    n_warmup: int = 50
    start_exploration: int = 100
    episode_length: int = 50
    seed: int = 0
    fit_sample_size: int = 2048
    cluster_fit_size: int = 1024
    kde_bandwidth: float = 0.5
    kde_max_points: int = 512
    buffer_capacity: int = 200_000
    env_size: int = 24
    env_delta: float = 0.1
    env_r_grab: float = 0.15
    env_r_tv: float = 0.15
    env_door_width: float = 0.2
    env_tv_resample_prob: float = 0.1
    env_n_backgrounds: int = 5
    label: str = field(default="", compare=False)

    def validate(self) -> ExperimentConfig:
        if self.strategy not in STRATEGIES:
            raise ConfigError(f"strategy must be one of {STRATEGIES}, got {self.strategy!r}")
        if self.cluster_sampling not in CLUSTER_SAMPLING:
            raise ConfigError(f"cluster_sampling must be one of {CLUSTER_SAMPLING}")
        if not -1.0 <= self.alpha <= 0.0:
            raise ConfigError(f"alpha must lie in [-1, 0], got {self.alpha}")
        positive = ("l", "d", "n_epochs", "goals_per_epoch", "n_warmup", "episode_length",
                    "fit_sample_size", "cluster_fit_size", "kde_max_points", "buffer_capacity", "env_size", "env_n_backgrounds")
        for name in positive:
            if getattr(self, name) < 1:
                raise ConfigError(f"{name} must be positive")
        for name in ("T", "kde_bandwidth", "eps_reg", "env_delta"):
            if not getattr(self, name) > 0:
                raise ConfigError(f"{name} must be positive")
        if not 0 <= self.start_exploration <= self.n_epochs:
            raise ConfigError("start_exploration must lie in [0, n_epochs]")
        if not self.candidate_ks or min(self.candidate_ks) < 1:
            raise ConfigError("candidate_ks must be nonempty positive integers")
        if self.d > 3 * (self.env_size // 2) ** 2:
            raise ConfigError("latent dimension exceeds the feature dimension")
        return self

    def env_config(self) -> EnvConfig:
        return EnvConfig(size=self.env_size, delta=self.env_delta, r_grab=self.env_r_grab,
                         r_tv=self.env_r_tv, door_width=self.env_door_width,
                         tv_resample_prob=self.env_tv_resample_prob, n_backgrounds=self.env_n_backgrounds)

    def name(self) -> str:
        if self.label:
            return self.label
        base = {"uniform": "Uniform", "countbased": "CountBased", "skewfit": "Skewfit"}[self.strategy]
        if self.strategy != "uniform" and self.alpha != -1.0:
            base += f"(a={self.alpha:g})"
        if not self.wrap_grimgep:
            return base
        return ("GRIM-UNI-" if self.cluster_sampling == "uniform-ablation" else "GRIM-") + base

    def to_dict(self) -> dict:
        d = dataclasses.asdict(self)
        d["candidate_ks"] = list(self.candidate_ks)
        return d

    def fingerprint(self) -> str:
        """Hash of everything but the seed and label."""
        d = self.to_dict()
        d.pop("seed")
        d.pop("label")
        return hashlib.sha256(json.dumps(d, sort_keys=True).encode()).hexdigest()[:12]

    def replace(self, **kw) -> ExperimentConfig:
        return dataclasses.replace(self, **kw)


def _parse_value(name: str, raw: str):
    types = {f.name: f.type for f in fields(ExperimentConfig)}
    if name not in types:
        raise ConfigError(f"unknown config key {name!r}")
    t = types[name]
    raw = raw.strip()
    try:
        if t == "bool":
            low = raw.lower()
            if low not in ("true", "false", "1", "0", "yes", "no"):
                raise ValueError(raw)
            return low in ("true", "1", "yes")
        if t == "int":
            return int(raw)
        if t == "float":
            return float(raw)
        if t == "tuple":
            return tuple(int(x) for x in raw.replace(",", " ").split())
        return raw
    except ValueError as exc:
        raise ConfigError(f"bad value for {name}: {raw!r}") from exc


def parse_config_text(text: str, base: ExperimentConfig | None = None) -> ExperimentConfig:
    values = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected key = value")
        key, raw = line.split("=", 1)
        key = key.strip()
        values[key] = _parse_value(key, raw)
    return dataclasses.replace(base or ExperimentConfig(), **values)


def load_config(path, overrides=()) -> ExperimentConfig:
    cfg = parse_config_text(Path(path).read_text())
    return apply_overrides(cfg, overrides)


def apply_overrides(cfg: ExperimentConfig, overrides) -> ExperimentConfig:
    for item in overrides:
        if "=" not in item:
            raise ConfigError(f"override must be key=value, got {item!r}")
        key, raw = item.split("=", 1)
        cfg = dataclasses.replace(cfg, **{key.strip(): _parse_value(key.strip(), raw)})
    return cfg.validate()


def format_config(cfg: ExperimentConfig) -> str:
    lines = []
    for f in fields(cfg):
        v = getattr(cfg, f.name)
        if isinstance(v, tuple):
            v = ",".join(str(x) for x in v)
        elif isinstance(v, bool):
            v = str(v).lower()
        lines.append(f"{f.name} = {v}")
    return "\n".join(lines) + "\n"
