"""Experiment configuration files.

Grammar: an INI file (``configparser`` dialect, ``key = value``) with the
sections ``[experiment]``, ``[model]``, ``[chain]`` and ``[topology]``.
Lists are comma separated (``taus = 1, 2, 5``).  Only ``kind`` under
``[experiment]`` is required; every other key falls back to a default that
depends on the experiment kind (see ``DEFAULTS``).  Unknown sections or
keys, and values that do not parse as the declared type, are rejected with
a ``ConfigError`` naming the offending key.
"""
from __future__ import annotations

import configparser
import io
from dataclasses import asdict, dataclass, fields
from pathlib import Path
from typing import Optional, Tuple

from .errors import ConfigError

EXPERIMENTS = ("synth-mse", "variance-speedup", "multichain", "blr")

# key -> (section, type); "ints" is a comma-separated integer list
SCHEMA = {
    "kind": ("experiment", str),
    "replicates": ("experiment", int),
    "base_seed": ("experiment", int),
    "checkpoints": ("experiment", int),
    "model": ("model", str),
    "n_items": ("model", int),
    "theta_true": ("model", float),
    "data_seed": ("model", int),
    "train_path": ("model", "path"),
    "test_path": ("model", "path"),
    "n_features": ("model", int),
    "subset": ("model", int),
    "kernel": ("chain", str),
    "minibatch": ("chain", int),
    "step_size": ("chain", "optfloat"),
    "step_scale": ("chain", str),
    "friction": ("chain", float),
    "c": ("chain", float),
    "l0": ("chain", int),
    "taus": ("chain", "ints"),
    "iterations": ("chain", int),
    "staleness_bound": ("chain", int),
    "workers": ("topology", "ints"),
    "servers": ("topology", "ints"),
    "policy": ("topology", str),
    "compute_mean": ("topology", float),
    "target": ("topology", "optfloat"),
}

_COMMON = dict(
    replicates=200, base_seed=0, checkpoints=50,
    model="gaussian", n_items=1000, theta_true=0.0, data_seed=1,
    train_path=None, test_path=None, n_features=123, subset=2000,
    kernel="sgld", minibatch=10, step_size=None, step_scale="absolute", friction=1.0,
    c=1.0 / 30.0, l0=500, taus=(0,), iterations=1000, staleness_bound=-1,
    workers=(1,), servers=(1,), policy="round-robin", compute_mean=1.0, target=None,
)

DEFAULTS = {
    "synth-mse": dict(_COMMON, taus=(1, 2, 5, 10, 15, 20), step_scale="per_datum"),
    "variance-speedup": dict(_COMMON, workers=(1, 2, 4, 8), step_size=0.02 / 1001, iterations=2000),
    "multichain": dict(_COMMON, servers=(1, 2, 4), step_size=0.02 / 1001, iterations=1000),
    "blr": dict(_COMMON, model="blr", replicates=10, minibatch=20, step_size=1e-4, iterations=1000,
                workers=(1, 2, 4)),
}


@dataclass(frozen=True)
class ExperimentConfig:
    kind: str
    replicates: int
    base_seed: int
    checkpoints: int
    model: str
    n_items: int
    theta_true: float
    data_seed: int
    train_path: Optional[str]
    test_path: Optional[str]
    n_features: int
    subset: int
    kernel: str
    minibatch: int
    step_size: Optional[float]
    step_scale: str
    friction: float
    c: float
    l0: int
    taus: Tuple[int, ...]
    iterations: int
    staleness_bound: int
    workers: Tuple[int, ...]
    servers: Tuple[int, ...]
    policy: str
    compute_mean: float
    target: Optional[float]

    def replace(self, **changes) -> "ExperimentConfig":
        d = asdict(self)
        d.update({k: v for k, v in changes.items() if v is not None})
        return validate(d)

    def kernel_step(self, h, n_items):
        """Map a nominal step size to the Euler step actually used by the kernel."""
        return h / n_items if self.step_scale == "per_datum" else h


def _coerce(key, typ, value):
    try:
        if typ == "ints":
            if isinstance(value, str):
                value = [v for v in value.replace(" ", "").split(",") if v]
            return tuple(int(v) for v in value)
        if typ == "optfloat":
            if value is None or (isinstance(value, str) and value.strip().lower() in ("", "none", "auto")):
                return None
            return float(value)
        if typ == "path":
            if value is None or (isinstance(value, str) and value.strip().lower() in ("", "none")):
                return None
            return str(value)
        if typ is int:
            if isinstance(value, float) and not value.is_integer():
                raise ValueError
            return int(value)
        if typ is float:
            return float(value)
        return str(value).strip()
    except (TypeError, ValueError):
        raise ConfigError(f"key {key!r}: cannot read {value!r} as {getattr(typ, '__name__', typ)}") from None


def validate(raw: dict) -> ExperimentConfig:
    """Resolve defaults for ``raw['kind']``, type-check every key and check ranges."""
    unknown = sorted(set(raw) - set(SCHEMA))
    if unknown:
        raise ConfigError(f"unknown key {unknown[0]!r}")
    if "kind" not in raw or raw["kind"] is None:
        raise ConfigError("missing required key 'kind'")
    kind = str(raw["kind"]).strip()
    if kind not in EXPERIMENTS:
        raise ConfigError(f"key 'kind': unknown experiment {kind!r}")
    merged = dict(DEFAULTS[kind])
    merged.update({k: v for k, v in raw.items() if k != "kind"})
    values = {k: _coerce(k, SCHEMA[k][1], v) for k, v in merged.items()}
    values["kind"] = kind
    cfg = ExperimentConfig(**values)
    _check_ranges(cfg)
    return cfg


def _check_ranges(cfg: ExperimentConfig):
    if cfg.replicates < 1:
        raise ConfigError("key 'replicates': must be >= 1")
    if cfg.checkpoints < 1:
        raise ConfigError("key 'checkpoints': must be >= 1")
    if cfg.model not in ("gaussian", "blr"):
        raise ConfigError(f"key 'model': unknown model {cfg.model!r}")
    if cfg.kernel not in ("sgld", "sghmc"):
        raise ConfigError(f"key 'kernel': unknown kernel {cfg.kernel!r}")
    if cfg.step_scale not in ("absolute", "per_datum"):
        raise ConfigError(f"key 'step_scale': expected 'absolute' or 'per_datum', got {cfg.step_scale!r}")
    if cfg.policy not in ("round-robin", "random-ready", "event-driven"):
        raise ConfigError(f"key 'policy': unknown policy {cfg.policy!r}")
    if cfg.step_size is not None and not cfg.step_size > 0:
        raise ConfigError("key 'step_size': must be positive")
    if cfg.minibatch < 1 or cfg.iterations < 1 or cfg.n_items < 0:
        raise ConfigError("keys 'minibatch', 'iterations' must be >= 1 and 'n_items' >= 0")
    if not cfg.c > 0 or cfg.l0 < 1:
        raise ConfigError("keys 'c' and 'l0' must be positive")
    if any(t < 0 for t in cfg.taus) or not cfg.taus:
        raise ConfigError("key 'taus': need a non-empty list of non-negative integers")
    if cfg.kind == "synth-mse" and any(t < 1 for t in cfg.taus):
        raise ConfigError("key 'taus': synth-mse needs tau >= 1")
    if any(w < 1 for w in cfg.workers) or not cfg.workers:
        raise ConfigError("key 'workers': need a non-empty list of positive integers")
    if any(s < 1 for s in cfg.servers) or not cfg.servers:
        raise ConfigError("key 'servers': need a non-empty list of positive integers")
    if not cfg.compute_mean > 0:
        raise ConfigError("key 'compute_mean': must be positive")
    for key in ("train_path", "test_path"):
        p = getattr(cfg, key)
        if p is not None and not Path(p).exists():
            raise ConfigError(f"key {key!r}: file {p} does not exist")
    if cfg.kind == "variance-speedup" and 1 not in cfg.workers:
        raise ConfigError("key 'workers': variance-speedup needs W=1 as the baseline")


def parse_config_text(text: str) -> ExperimentConfig:
    parser = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=(";",))
    parser.optionxform = str
    try:
        parser.read_string(text)
    except configparser.Error as exc:
        raise ConfigError(f"malformed config: {exc}") from None
    raw = {}
    for section in parser.sections():
        for key, value in parser.items(section):
            if key not in SCHEMA:
                raise ConfigError(f"unknown key {key!r}")
            if SCHEMA[key][0] != section:
                raise ConfigError(f"key {key!r} belongs in section [{SCHEMA[key][0]}], not [{section}]")
            raw[key] = value
    return validate(raw)


def parse_config(path) -> ExperimentConfig:
    return parse_config_text(Path(path).read_text())


def _fmt(value):
    if value is None:
        return "none"
    if isinstance(value, tuple):
        return ", ".join(str(v) for v in value)
    if isinstance(value, float):
        return repr(value)
    return str(value)


def serialize_config(cfg: ExperimentConfig) -> str:
    """Full INI text with every default spelled out; parses back to an equal config."""
    by_section = {}
    for f in fields(cfg):
        by_section.setdefault(SCHEMA[f.name][0], []).append((f.name, getattr(cfg, f.name)))
    out = io.StringIO()
    for section in ("experiment", "model", "chain", "topology"):
        out.write(f"[{section}]\n")
        for key, value in by_section[section]:
            out.write(f"{key} = {_fmt(value)}\n")
        out.write("\n")
    return out.getvalue()
