"""Flat key=value run configuration shared by the trainer and the CLI."""
from __future__ import annotations

import os
from dataclasses import dataclass, fields

from .. import font5x7


class ConfigError(ValueError):
    """Unusable run configuration (unknown key, bad type, bad value)."""


@dataclass
class RunConfig:
    """Everything a training run needs; file keys match the field names
    except ``lambda`` which maps to ``lam``."""

    seed: int = 0
    lr: float = 1e-4
    lam: float = 0.01
    beta: float = 0.02
    tau: float = 0.1
    steps: int = 100
    stage: str = "full"
    batch_full: int = 8
    batch_weak: int = 8
    full_data: str = ""
    weak_data: str = ""
    steps_full: int = 0      # psl pretraining budget when starting from scratch
    steps_opm: int = 0       # stage-one budget inside psl (0: same as steps)
    init_checkpoint: str = ""
    opm_checkpoint: str = ""
    score_thresh: float = 0.5
    nms_thresh: float = 0.3
    max_proposals: int = 8   # per weak image, top-scoring after NMS
    clip_norm: float = 5.0
    update_opm: bool = False  # stage two: also update the matcher projections
    alphabet: str = font5x7.ALPHABET

    def validate(self) -> "RunConfig":
        if self.stage not in ("full", "opm", "psl"):
            raise ConfigError(f"stage must be full|opm|psl, got {self.stage!r}")
        positive = ["lr", "tau", "batch_full", "batch_weak", "clip_norm",
                    "max_proposals"]
        for name in positive:
            if getattr(self, name) <= 0:
                raise ConfigError(f"{name} must be positive")
        for name in ["steps", "steps_full", "steps_opm", "seed"]:
            if getattr(self, name) < 0:
                raise ConfigError(f"{name} must be non-negative")
        if not (0.0 < self.score_thresh < 1.0 and 0.0 < self.nms_thresh < 1.0):
            raise ConfigError("thresholds must lie in (0, 1)")
        if not self.alphabet:
            raise ConfigError("alphabet must be non-empty")
        return self


_KEY_ALIASES = {"lambda": "lam"}
_BOOL_WORDS = {"true": True, "false": False, "1": True, "0": False,
               "yes": True, "no": False}


def parse_kv_file(path) -> dict[str, str]:
    """Read ``key = value`` lines; '#' starts a comment."""
    if not os.path.exists(path):
        raise FileNotFoundError(path)
    out = {}
    with open(path, "r", encoding="utf-8") as f:
        for line_no, raw in enumerate(f, start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ConfigError(f"{path}:{line_no}: expected key = value")
            key, value = line.split("=", 1)
            out[key.strip()] = value.strip()
    return out


def _coerce(name: str, kind, raw: str):
    try:
        if kind is bool:
            return _BOOL_WORDS[raw.lower()]
        return kind(raw)
    except (ValueError, KeyError):
        raise ConfigError(f"bad value for {name}: {raw!r}") from None


def load_run_config(path, overrides: dict | None = None) -> RunConfig:
    """Parse a run config file, apply overrides, and validate."""
    raw = parse_kv_file(path)
    if overrides:
        raw.update({k: str(v) for k, v in overrides.items() if v is not None})
    return run_config_from_dict(raw)


def run_config_from_dict(raw: dict) -> RunConfig:
    known = {f.name: f.type for f in fields(RunConfig)}
    types = {"seed": int, "lr": float, "lam": float, "beta": float, "tau": float,
             "steps": int, "stage": str, "batch_full": int, "batch_weak": int,
             "full_data": str, "weak_data": str, "steps_full": int,
             "steps_opm": int, "init_checkpoint": str, "opm_checkpoint": str,
             "score_thresh": float, "nms_thresh": float, "max_proposals": int,
             "clip_norm": float, "update_opm": bool, "alphabet": str}
    kwargs = {}
    for key, value in raw.items():
        name = _KEY_ALIASES.get(key, key)
        if name not in known:
            raise ConfigError(f"unknown config key {key!r}")
        kwargs[name] = _coerce(name, types[name], value) if isinstance(value, str) else value
    return RunConfig(**kwargs).validate()
