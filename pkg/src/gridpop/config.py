"""Run configuration: defaults, key-value config files and the config digest."""

from __future__ import annotations

import configparser
import dataclasses
import hashlib
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Mapping

from .forest import ForestParams
from .simulate import SimConfig
from .synthetic import SynthConfig


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class RunConfig:
    events: str | None = None
    metas: str | None = None
    model: str | None = None
    out: str | None = None
    train_end: int = 78
    valid_end: int = 104
    label_weeks: int = 26
    alpha_step: float = 0.01
    n_trees: int = 100
    max_depth: int | None = None
    min_samples_leaf: int = 1
    features_per_split: int | None = None
    capacity_bytes: int | None = None
    capacity_fraction: float = 0.6
    max_replicas: int = 4
    purge_threshold: float = 0.1
    purge_every: int = 26
    # None starts the simulation at valid_end
    start_week: int | None = None
    policy: str = "metric_m"
    seed: int = 42
    synth: Mapping[str, Any] = field(default_factory=dict)

    PATH_KEYS = ("events", "metas", "model", "out")

    def forest_params(self) -> ForestParams:
        return ForestParams(self.n_trees, self.max_depth, self.min_samples_leaf, self.features_per_split)

    def sim_config(self) -> SimConfig:
        return SimConfig(
            policy=self.policy,
            capacity_bytes=self.capacity_bytes,
            capacity_fraction=self.capacity_fraction,
            max_replicas=self.max_replicas,
            purge_threshold=self.purge_threshold,
            purge_every=self.purge_every,
            start_week=self.valid_end if self.start_week is None else self.start_week,
            alpha_step=self.alpha_step,
        )

    def synth_config(self) -> SynthConfig:
        return SynthConfig.from_mapping(self.synth)

    def values(self) -> dict[str, Any]:
        """Resolved non-path values, the input to the digest."""
        out = {}
        for f in dataclasses.fields(self):
            if f.name in self.PATH_KEYS:
                continue
            v = getattr(self, f.name)
            out[f.name] = dict(sorted(v.items())) if f.name == "synth" else v
        return out

    def digest(self, inputs: Mapping[str, str | None] = ()) -> str:
        """Stable hash of the resolved values and the content of any input files."""
        h = hashlib.sha256(json.dumps(self.values(), sort_keys=True, default=str).encode())
        for name, path in sorted(dict(inputs).items()):
            if path and Path(path).is_file():
                h.update(name.encode())
                h.update(hashlib.sha256(Path(path).read_bytes()).digest())
        return h.hexdigest()[:16]


_FIELDS = {f.name: f for f in dataclasses.fields(RunConfig)}
_SYNTH_FIELDS = {f.name for f in dataclasses.fields(SynthConfig)}


def _coerce(name: str, raw: Any) -> Any:
    if raw is None or not isinstance(raw, str):
        return raw
    kind = str(_FIELDS[name].type)
    if raw.strip().lower() in ("none", "") and "None" in kind:
        return None
    try:
        if kind.startswith("int"):
            return int(raw)
        if kind.startswith("float"):
            return float(raw)
    except ValueError:
        raise ConfigError(f"bad value for {name}: {raw!r}") from None
    return raw


def read_config_file(path: str | Path) -> dict[str, str]:
    """Parse ``key = value`` lines; ``#`` and ``;`` start comments."""
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"config file not found: {path}")
    parser = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=("#", ";"))
    try:
        parser.read_string("[run]\n" + path.read_text(encoding="utf-8"), source=str(path))
    except configparser.Error as exc:
        raise ConfigError(f"{path}: {exc}") from None
    return dict(parser["run"])


def resolve(file_values: Mapping[str, str] | None = None, overrides: Mapping[str, Any] | None = None) -> RunConfig:
    """Defaults, then config-file values, then non-None overrides."""
    kwargs: dict[str, Any] = {}
    synth: dict[str, Any] = {}
    for source in (file_values or {}, {k: v for k, v in (overrides or {}).items() if v is not None}):
        for key, raw in source.items():
            if key in _SYNTH_FIELDS:
                synth[key] = raw
            elif key in _FIELDS and key != "synth":
                kwargs[key] = _coerce(key, raw)
            else:
                raise ConfigError(f"unknown config key {key!r}")
    try:
        sc = SynthConfig.from_mapping(synth)
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    return RunConfig(synth={k: getattr(sc, k) for k in synth}, **kwargs)
