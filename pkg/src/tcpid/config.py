"""Experiment configuration: defaults, JSON loading, validation, hashing.

A configuration is a plain dict so it round-trips through JSON untouched.
Field values may be overridden from the environment with the TCPID_ prefix
(for example TCPID_DURATION=10 or TCPID_FLOWS_PER_ALGORITHM=4); override
values are parsed as JSON with a plain-string fallback.
"""
from __future__ import annotations

import copy
import hashlib
import json
import os
from pathlib import Path

ENV_PREFIX = "TCPID_"

SCENARIOS = ("wired", "wireless")

# Link parameter ranges for the randomized sweeps. Wired flows draw the
# bottleneck rate, the two-way propagation delay and the buffer size;
# wireless flows additionally draw the random-loss probability, the RLC
# queue capacity and the radio corruption probability.
DEFAULT_CONFIG = {
    "scenario": "wired",
    "rate_mbps": [5.0, 10.0],
    "rtt_ms": [40.0, 100.0],
    "buffer_pkts": [200, 1000],
    "random_loss": [0.0, 0.0],
    "rlc_cap_pkts": [100, 700],
    "rlc_err_prob": [0.02, 0.10],
    "flows_per_algorithm": 20,
    "duration": 60.0,
    "seed": 1,
    "workers": 1,
    "interval": 0.005,
    "alpha": 0.3,
    "window": 3000,
    "train_stride": 1500,
    "test_stride": 3000,
    "time_steps": 20,
    "split": [0.8, 0.2],
    "model": {
        "kind": "lstm",
        "lstm_units": [64, 64],
        "dense_units": [32],
    },
    "epochs": 60,
    "batch_size": 32,
    "lr": 1e-4,
    "val_fraction": 0.15,
}

WIRELESS_OVERRIDES = {
    "scenario": "wireless",
    "random_loss": [0.005, 0.02],
}


class ConfigError(ValueError):
    """Validation failure that names the offending field."""

    def __init__(self, field: str, message: str):
        self.field = field
        super().__init__(f"config field {field!r}: {message}")


def default_config(scenario: str = "wired") -> dict:
    cfg = copy.deepcopy(DEFAULT_CONFIG)
    if scenario == "wireless":
        cfg.update(copy.deepcopy(WIRELESS_OVERRIDES))
    elif scenario != "wired":
        raise ConfigError("scenario", f"must be one of {SCENARIOS}")
    return cfg


def _parse_env_value(raw: str):
    try:
        return json.loads(raw)
    except json.JSONDecodeError:
        return raw


def apply_env_overrides(cfg: dict, environ=None) -> dict:
    """Overlay TCPID_<FIELD> environment variables onto a config copy."""
    environ = os.environ if environ is None else environ
    cfg = copy.deepcopy(cfg)
    for key, raw in environ.items():
        if not key.startswith(ENV_PREFIX):
            continue
        field = key[len(ENV_PREFIX):].lower()
        if field in cfg:
            cfg[field] = _parse_env_value(raw)
    return cfg


def _require_range(cfg, field, lo_bound, hi_bound, integer=False, closed_hi=True):
    value = cfg[field]
    if (not isinstance(value, (list, tuple)) or len(value) != 2
            or not all(isinstance(v, (int, float)) and not isinstance(v, bool)
                       for v in value)):
        raise ConfigError(field, "must be a [low, high] pair of numbers")
    lo, hi = value
    if lo > hi:
        raise ConfigError(field, f"range is inverted: {lo} > {hi}")
    if lo < lo_bound or (hi > hi_bound if closed_hi else hi >= hi_bound):
        cmp = "<=" if closed_hi else "<"
        raise ConfigError(field, f"must satisfy {lo_bound} <= low <= high {cmp} {hi_bound}")
    if integer and (lo != int(lo) or hi != int(hi)):
        raise ConfigError(field, "bounds must be integers")


def _require_number(cfg, field, lo, hi=None, integer=False, open_lo=False):
    value = cfg[field]
    if not isinstance(value, (int, float)) or isinstance(value, bool):
        raise ConfigError(field, "must be a number")
    if open_lo and value <= lo:
        raise ConfigError(field, f"must be > {lo}")
    if not open_lo and value < lo:
        raise ConfigError(field, f"must be >= {lo}")
    if hi is not None and value > hi:
        raise ConfigError(field, f"must be <= {hi}")
    if integer and value != int(value):
        raise ConfigError(field, "must be an integer")


def validate_config(cfg: dict) -> dict:
    """Check fields and ranges; returns the config for chaining."""
    unknown = set(cfg) - set(DEFAULT_CONFIG)
    if unknown:
        raise ConfigError(sorted(unknown)[0], "unknown field")
    missing = set(DEFAULT_CONFIG) - set(cfg)
    if missing:
        raise ConfigError(sorted(missing)[0], "missing field")

    if cfg["scenario"] not in SCENARIOS:
        raise ConfigError("scenario", f"must be one of {SCENARIOS}")
    _require_range(cfg, "rate_mbps", 0.1, 10000.0)
    _require_range(cfg, "rtt_ms", 1.0, 10000.0)
    _require_range(cfg, "buffer_pkts", 1, 10**6, integer=True)
    _require_range(cfg, "random_loss", 0.0, 1.0, closed_hi=False)
    _require_range(cfg, "rlc_cap_pkts", 1, 10**6, integer=True)
    _require_range(cfg, "rlc_err_prob", 0.0, 1.0, closed_hi=False)
    if cfg["scenario"] == "wired" and tuple(cfg["random_loss"]) != (0.0, 0.0):
        raise ConfigError("random_loss", "must be [0, 0] for the wired scenario")
    _require_number(cfg, "flows_per_algorithm", 1, integer=True)
    _require_number(cfg, "duration", 0.0, open_lo=True)
    _require_number(cfg, "seed", 0, integer=True)
    _require_number(cfg, "workers", 1, 64, integer=True)
    _require_number(cfg, "interval", 0.0, open_lo=True)
    _require_number(cfg, "alpha", 0.0, 1.0, open_lo=True)
    _require_number(cfg, "window", 1, integer=True)
    _require_number(cfg, "train_stride", 1, integer=True)
    _require_number(cfg, "test_stride", 1, integer=True)
    _require_number(cfg, "time_steps", 1, integer=True)
    if cfg["window"] % cfg["time_steps"] != 0:
        raise ConfigError("time_steps", "must divide window evenly")

    split = cfg["split"]
    if (not isinstance(split, (list, tuple)) or len(split) != 2
            or not all(isinstance(v, (int, float)) for v in split)):
        raise ConfigError("split", "must be a [train, test] fraction pair")
    if not (0.0 < split[0] < 1.0 and 0.0 < split[1] < 1.0):
        raise ConfigError("split", "fractions must be in (0, 1)")
    if abs(split[0] + split[1] - 1.0) > 1e-9:
        raise ConfigError("split", "fractions must sum to 1")

    model = cfg["model"]
    if not isinstance(model, dict) or "kind" not in model:
        raise ConfigError("model", "must be an object with a 'kind' field")
    if model["kind"] == "lstm":
        for key in ("lstm_units", "dense_units"):
            units = model.get(key)
            if (not isinstance(units, (list, tuple)) or not units
                    or not all(isinstance(u, int) and u >= 1 for u in units)):
                raise ConfigError(f"model.{key}", "must be a non-empty list of ints >= 1")
    elif model["kind"] == "dense":
        units = model.get("hidden")
        if (not isinstance(units, (list, tuple)) or not units
                or not all(isinstance(u, int) and u >= 1 for u in units)):
            raise ConfigError("model.hidden", "must be a non-empty list of ints >= 1")
    else:
        raise ConfigError("model.kind", "must be 'lstm' or 'dense'")

    _require_number(cfg, "epochs", 1, integer=True)
    _require_number(cfg, "batch_size", 1, integer=True)
    _require_number(cfg, "lr", 0.0, open_lo=True)
    if not isinstance(cfg["val_fraction"], (int, float)) or not (
            0.0 <= cfg["val_fraction"] < 1.0):
        raise ConfigError("val_fraction", "must be in [0, 1)")
    return cfg


def load_config(path=None, scenario=None, env=True, overrides=None) -> dict:
    """Defaults, then file, then explicit overrides, then environment."""
    cfg = default_config(scenario or "wired")
    if path is not None:
        with open(path) as fh:
            loaded = json.load(fh)
        if not isinstance(loaded, dict):
            raise ConfigError("<root>", "config file must hold a JSON object")
        if scenario is None and loaded.get("scenario") == "wireless":
            cfg = default_config("wireless")
        cfg.update(loaded)
    if scenario is not None:
        cfg["scenario"] = scenario
        if scenario == "wireless" and (path is None or "random_loss" not in loaded):
            cfg["random_loss"] = copy.deepcopy(WIRELESS_OVERRIDES["random_loss"])
        if scenario == "wired" and (path is None or "random_loss" not in loaded):
            cfg["random_loss"] = [0.0, 0.0]
    if overrides:
        cfg.update(copy.deepcopy(overrides))
    if env:
        cfg = apply_env_overrides(cfg)
    return validate_config(cfg)


def config_hash(cfg: dict) -> str:
    """sha256 of the canonical JSON form."""
    canon = json.dumps(cfg, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canon.encode("utf-8")).hexdigest()


def write_config(path, cfg: dict) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w") as fh:
        json.dump(cfg, fh, indent=2, sort_keys=True)
        fh.write("\n")
