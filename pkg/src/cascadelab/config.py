"""Experiment configuration: defaults, INI-style files, CLI overrides.

Precedence is CLI override > config file > built-in default, except the
thread count, where the CASCADELAB_THREADS environment variable overrides
everything (operational escape hatch for shared machines).
"""

from __future__ import annotations

import configparser
import math
import os
from dataclasses import dataclass, field, fields

EXPERIMENTS = ("normalization", "maxmass", "modulus", "tail", "wavefront",
               "kpz", "spectrum", "levy-compose")
THREADS_ENV = "CASCADELAB_THREADS"
LEVEL_HARD_CAP = 30
MEMORY_GUARD_BYTES = 6 << 30


class ConfigError(ValueError):
    pass


@dataclass
class ExperimentConfig:
    experiment: str
    seed: int = 20260810
    beta: float = 1.0
    alpha: float = 0.5
    n_list: list[int] = field(default_factory=lambda: [18])
    replicas: int = 1000
    iterations: int = 60
    dx: float = 0.02
    gamma: float = 0.4
    theta: float = 1.0
    depth_lo: int = 8
    depth_hi: int = 18
    q_grid: list[float] = field(default_factory=lambda: [round(0.05 * k, 2) for k in range(81)])
    wave_alpha: str = "0.5"  # initial tail decay rate: a float, 'critical' or 'inf'
    output_dir: str | None = None
    threads: int | None = None  # None = auto

    def __post_init__(self):
        if self.experiment not in EXPERIMENTS:
            raise ConfigError(f"unknown experiment {self.experiment!r}; "
                              f"choose from {', '.join(EXPERIMENTS)}")
        if self.replicas < 1:
            raise ConfigError("replicas must be >= 1")
        if not self.n_list:
            raise ConfigError("n_list must be nonempty")
        for n in self.n_list:
            if not 1 <= n <= LEVEL_HARD_CAP:
                raise ConfigError(f"depth {n} outside [1, {LEVEL_HARD_CAP}]")
        if self.beta <= 0:
            raise ConfigError("beta must be positive")
        if not 0 < self.alpha < 1:
            raise ConfigError("alpha must lie in (0, 1)")
        if self.seed < 0 or self.seed >= 1 << 64:
            raise ConfigError("seed must be an unsigned 64-bit integer")
        if self.iterations < 10:
            raise ConfigError("iterations must be >= 10")
        if self.experiment == "wavefront":
            self.parsed_wave_alpha()
        if not 0 <= self.depth_lo < self.depth_hi <= LEVEL_HARD_CAP:
            raise ConfigError("need 0 <= depth_lo < depth_hi <= hard cap")
        if self.experiment in ("kpz",) and self.depth_hi > max(self.n_list):
            raise ConfigError("depth_hi cannot exceed the measure depth")

    def parsed_wave_alpha(self) -> float:
        raw = str(self.wave_alpha).strip().lower()
        if raw in ("inf", "infinity"):
            return float("inf")
        if raw == "critical":
            return math.sqrt(2.0 * math.log(2.0))
        try:
            v = float(raw)
        except ValueError as exc:
            raise ConfigError(f"wave_alpha must be a rate, 'critical' or 'inf', got {raw!r}") from exc
        if v <= 0:
            raise ConfigError("wave_alpha must be positive")
        return v

    def resolved_threads(self) -> int:
        env = os.environ.get(THREADS_ENV)
        if env is not None:
            try:
                t = int(env)
            except ValueError as exc:
                raise ConfigError(f"{THREADS_ENV} must be an integer") from exc
            if t < 1:
                raise ConfigError(f"{THREADS_ENV} must be >= 1")
            return t
        if self.threads is not None:
            if self.threads < 1:
                raise ConfigError("threads must be >= 1")
            return self.threads
        return max(1, os.cpu_count() or 1)

    def memory_estimate_bytes(self) -> int:
        # peak per worker: three double arrays at the deepest level
        return (1 << max(self.n_list)) * 8 * 3 * self.resolved_threads()

    def check_resources(self) -> None:
        need = self.memory_estimate_bytes()
        if need > MEMORY_GUARD_BYTES:
            raise ConfigError(
                f"estimated {need >> 20} MiB exceeds the {MEMORY_GUARD_BYTES >> 20} MiB "
                f"budget; reduce depth, replicas or threads")

    def to_dict(self) -> dict:
        return {
            "experiment": self.experiment,
            "seed": self.seed,
            "beta": self.beta,
            "alpha": self.alpha,
            "n_list": list(self.n_list),
            "replicas": self.replicas,
            "iterations": self.iterations,
            "dx": self.dx,
            "gamma": self.gamma,
            "theta": self.theta,
            "depth_lo": self.depth_lo,
            "depth_hi": self.depth_hi,
            "q_grid": list(self.q_grid),
            "wave_alpha": str(self.wave_alpha),
            "output_dir": self.output_dir,
            "threads": self.threads,
        }


_LIST_FIELDS = {"n_list", "q_grid"}
_INT_FIELDS = {"seed", "replicas", "iterations", "depth_lo", "depth_hi", "threads"}
_FLOAT_FIELDS = {"beta", "alpha", "dx", "gamma", "theta"}


def _parse_value(name: str, raw):
    if raw is None or isinstance(raw, (int, float, list)):
        return raw
    raw = str(raw).strip()
    try:
        if name in _LIST_FIELDS:
            items = [s for s in raw.replace(",", " ").split() if s]
            return [int(s) if name == "n_list" else float(s) for s in items]
        if name in _INT_FIELDS:
            return int(raw)
        if name in _FLOAT_FIELDS:
            return float(raw)
    except ValueError as exc:
        raise ConfigError(f"field {name!r}: cannot parse {raw!r}") from exc
    return raw


def load_config(experiment: str, config_path: str | None = None,
                overrides: dict | None = None) -> ExperimentConfig:
    """Assemble a config: defaults, then [global] and [experiment] file
    sections, then explicit overrides."""
    known = {f.name for f in fields(ExperimentConfig)}
    merged: dict = {"experiment": experiment}
    if config_path:
        parser = configparser.ConfigParser()
        read = parser.read(config_path)
        if not read:
            raise ConfigError(f"config file {config_path!r} not found")
        for section in ("global", experiment):
            if parser.has_section(section):
                for key, val in parser.items(section):
                    if key not in known:
                        raise ConfigError(f"unknown config field {key!r} in [{section}]")
                    merged[key] = _parse_value(key, val)
    for key, val in (overrides or {}).items():
        if val is None:
            continue
        if key not in known:
            raise ConfigError(f"unknown override field {key!r}")
        merged[key] = _parse_value(key, val)
    return ExperimentConfig(**merged)
