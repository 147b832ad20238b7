"""Experiment configuration in a flat ``section.key = value`` text format.

Values are Python literals (numbers, booleans, quoted strings, lists) or bare
strings. ``dump`` followed by ``parse`` reproduces the config exactly.
"""
from __future__ import annotations

import ast
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

from .rng import resolve_seed


class ConfigError(ValueError):
    pass


MODELS = ("zrp", "reflected", "gradphi", "oracle", "verify", "acceptance")


@dataclass
class ExperimentConfig:
    model: str
    action: str = ""
    params: dict = field(default_factory=dict)
    horizon: float = 1.0
    replicas: int = 1
    probes: list = field(default_factory=list)
    seed: int = 0
    out: str = "out"
    suite: str = ""
    budget: str = "full"
    workers: int = 1

    def __post_init__(self):
        if self.model not in MODELS:
            raise ConfigError(f"unknown model {self.model!r}")
        if self.horizon < 0:
            raise ConfigError("horizon must be non-negative")
        if self.replicas < 1:
            raise ConfigError("replicas must be positive")
        if self.budget not in ("small", "full"):
            raise ConfigError(f"unknown budget {self.budget!r}")

    def with_env_seed(self) -> "ExperimentConfig":
        d = asdict(self)
        d["seed"] = resolve_seed(self.seed)
        return ExperimentConfig(**d)


def _fmt(value) -> str:
    if isinstance(value, str):
        try:
            ast.literal_eval(value)
            return repr(value)
        except (ValueError, SyntaxError, MemoryError, RecursionError):
            pass
        if value != value.strip() or value == "" or not value.isprintable() or value.startswith("#"):
            return repr(value)
        return value
    return repr(value)


def _val(text: str):
    text = text.strip()
    try:
        return ast.literal_eval(text)
    except (ValueError, SyntaxError):
        return text


def dump(cfg: ExperimentConfig) -> str:
    lines = []
    for f in fields(cfg):
        v = getattr(cfg, f.name)
        if f.name == "params":
            continue
        lines.append(f"experiment.{f.name} = {_fmt(v)}")
    for k in sorted(cfg.params):
        lines.append(f"params.{k} = {_fmt(cfg.params[k])}")
    return "\n".join(lines) + "\n"


def parse(text: str) -> ExperimentConfig:
    top, params = {}, {}
    known = {f.name for f in fields(ExperimentConfig)} - {"params"}
    for no, raw in enumerate(text.splitlines(), 1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise ConfigError(f"line {no}: expected 'section.key = value'")
        key, value = line.split("=", 1)
        key = key.strip()
        if "." not in key:
            raise ConfigError(f"line {no}: key {key!r} lacks a section")
        section, name = key.split(".", 1)
        if section == "experiment":
            if name not in known:
                raise ConfigError(f"line {no}: unknown key {name!r}")
            top[name] = _val(value)
        elif section == "params":
            params[name] = _val(value)
        else:
            raise ConfigError(f"line {no}: unknown section {section!r}")
    if "model" not in top:
        raise ConfigError("experiment.model is required")
    try:
        return ExperimentConfig(params=params, **top)
    except TypeError as exc:
        raise ConfigError(str(exc)) from exc


def load(path: str | Path) -> ExperimentConfig:
    return parse(Path(path).read_text(encoding="utf-8"))


def save(cfg: ExperimentConfig, path: str | Path) -> None:
    Path(path).write_text(dump(cfg), encoding="utf-8", newline="\n")
