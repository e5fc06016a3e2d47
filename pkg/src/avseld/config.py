"""Versioned pipeline configuration with strict key checking."""
from __future__ import annotations

import copy
import hashlib
import json
from pathlib import Path

from .errors import ValidationError

CONFIG_VERSION = 1

DEFAULTS = {
    "version": CONFIG_VERSION,
    "seed": 0,
    "workers": 1,
    "simulate": {
        "num_clips": 4,
        "events_per_clip": 4,
        "duration_s": 10.0,
        "test_clips": 1,
    },
    "acs_set": "default",
    "features": {
        "write": True,
        "gaussian_width_h": 0.04,
        "gaussian_width_v": 0.08,
    },
    "fusion": {
        "sigma_deg": 30.0,
        "min_confidence": 0.0,
    },
    "loss_weights": {"beta1": 0.1, "beta2": 1.0, "gamma1": 1.0, "gamma2": 0.5},
    "metrics": {"threshold_deg": 20.0},
}


def _merge(user, defaults, path: str):
    if not isinstance(user, dict):
        raise ValidationError(f"config key '{path or '<root>'}' must be a mapping")
    out = copy.deepcopy(defaults)
    for key, value in user.items():
        key_path = f"{path}.{key}" if path else str(key)
        if key not in defaults:
            raise ValidationError(f"unknown config key '{key_path}'")
        default = defaults[key]
        if isinstance(default, dict):
            out[key] = _merge(value, default, key_path)
        elif key == "acs_set":
            if not (isinstance(value, str) or (isinstance(value, list) and all(isinstance(v, str) for v in value))):
                raise ValidationError("config key 'acs_set' must be a set name or a list of transform names")
            out[key] = value
        elif isinstance(default, bool):
            if not isinstance(value, bool):
                raise ValidationError(f"config key '{key_path}' must be a boolean")
            out[key] = value
        elif isinstance(default, int):
            if isinstance(value, bool) or not isinstance(value, int):
                raise ValidationError(f"config key '{key_path}' must be an integer")
            out[key] = value
        elif isinstance(default, float):
            if isinstance(value, bool) or not isinstance(value, (int, float)):
                raise ValidationError(f"config key '{key_path}' must be a number")
            out[key] = float(value)
        else:
            out[key] = value
    return out


def validate_config(user: dict) -> dict:
    """Merge ``user`` over the defaults, rejecting unknown keys and bad values."""
    cfg = _merge(user, DEFAULTS, "")
    if cfg["version"] != CONFIG_VERSION:
        raise ValidationError(f"config key 'version' must be {CONFIG_VERSION}")
    sim = cfg["simulate"]
    if sim["num_clips"] < 1:
        raise ValidationError("config key 'simulate.num_clips' must be >= 1")
    if not 0 <= sim["test_clips"] < sim["num_clips"]:
        raise ValidationError("config key 'simulate.test_clips' must be in [0, num_clips)")
    if sim["events_per_clip"] < 1 or sim["duration_s"] <= 0:
        raise ValidationError("config keys 'simulate.events_per_clip' and 'simulate.duration_s' must be positive")
    if sim["duration_s"] * 10 / sim["events_per_clip"] < 3:
        raise ValidationError("config 'simulate': each event needs at least 0.3 s")
    if cfg["workers"] < 1:
        raise ValidationError("config key 'workers' must be >= 1")
    if not 0 < cfg["fusion"]["sigma_deg"] <= 180:
        raise ValidationError("config key 'fusion.sigma_deg' must be in (0, 180]")
    if any(v < 0 for v in cfg["loss_weights"].values()):
        raise ValidationError("config key 'loss_weights' values must be non-negative")
    if min(cfg["features"]["gaussian_width_h"], cfg["features"]["gaussian_width_v"]) * 64 < 0.5:
        raise ValidationError("config 'features' Gaussian widths must be at least half a bin")
    return cfg


def load_config(path) -> dict:
    path = Path(path)
    text = path.read_text()
    try:
        if path.suffix in (".yaml", ".yml"):
            import yaml

            doc = yaml.safe_load(text)
        else:
            doc = json.loads(text)
    except Exception as exc:  # parser-specific exception types
        raise ValidationError(f"{path}: cannot parse config: {exc}") from None
    return validate_config(doc if doc is not None else {})


def config_hash(cfg: dict) -> str:
    canonical = json.dumps(cfg, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canonical.encode()).hexdigest()
