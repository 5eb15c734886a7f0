"""Experiment configuration: defaults, merging, validation.

Configs are JSON objects. Anything omitted takes the default below; the
fully resolved config is written next to the outputs so a run can be
repeated from it alone.
"""

from __future__ import annotations

import copy
import json
import math
from pathlib import Path

DEFAULTS: dict = {
    "seed": 7,
    "dataset": {
        "generator": "two_spirals",
        "n_per_class": 1000,
        "theta_lo": 0.5 * math.pi,
        "theta_hi": 2 * math.pi,
        "noise_sigma": 0.02,
        "k_components": 8,
        "num_classes": 2,
        "test_fraction": 0.25,
    },
    "codebook": {"dim_y": 1, "beta": None},
    "network": {"hidden": [128, 128, 128, 128], "activation": "silu", "time_encoding": "raw"},
    "train": {
        "epochs": 800,
        "batch_size": 256,
        "lr": 1e-3,
        "beta1": 0.9,
        "beta2": 0.999,
        "eps": 1e-8,
        "cosine": True,
        "objective": "symmetric",
    },
    "solver": {"scheme": "euler", "steps": 20},
    "classify": {"method": "ode", "steps": 1, "K": 1, "freeze_x": False, "n_mc": 64},
    "sweep": {"steps": [1, 2, 5, 10, 20, 50]},
}

CHOICES = {
    "dataset.generator": ("two_spirals", "gaussian_mixture"),
    "network.activation": ("silu", "tanh", "relu"),
    "network.time_encoding": ("raw", "sinusoidal"),
    "train.objective": ("symmetric", "conditional"),
    "solver.scheme": ("euler", "midpoint", "rk4"),
    "classify.method": ("ode", "bayes"),
}

POSITIVE = {
    "dataset.n_per_class", "dataset.theta_hi", "dataset.k_components", "codebook.dim_y",
    "train.epochs", "train.batch_size", "train.lr", "train.eps", "solver.steps",
    "classify.steps", "classify.K", "classify.n_mc",
}


class ConfigError(ValueError):
    pass


def _check_type(path, default, value):
    if default is None:
        if value is not None and (isinstance(value, bool) or not isinstance(value, (int, float))):
            raise ConfigError(f"config field {path!r} must be a number or null, got {value!r}")
        return
    if isinstance(default, bool):
        ok = isinstance(value, bool)
    elif isinstance(default, int):
        ok = isinstance(value, int) and not isinstance(value, bool)
    elif isinstance(default, float):
        ok = isinstance(value, (int, float)) and not isinstance(value, bool)
    elif isinstance(default, list):
        ok = isinstance(value, list) and all(isinstance(v, int) and not isinstance(v, bool) for v in value)
    else:
        ok = isinstance(value, type(default))
    if not ok:
        raise ConfigError(f"config field {path!r} has the wrong type: {value!r}")


def _merge(base: dict, over: dict, prefix=""):
    for key, value in over.items():
        path = f"{prefix}{key}"
        if key not in base:
            raise ConfigError(f"unknown config field {path!r}")
        if isinstance(base[key], dict):
            if not isinstance(value, dict):
                raise ConfigError(f"config field {path!r} must be an object")
            _merge(base[key], value, path + ".")
        else:
            _check_type(path, base[key], value)
            base[key] = float(value) if isinstance(base[key], float) else value


def validate(cfg: dict) -> dict:
    for path, allowed in CHOICES.items():
        sec, key = path.split(".")
        if cfg[sec][key] not in allowed:
            raise ConfigError(f"config field {path!r} must be one of {allowed}, got {cfg[sec][key]!r}")
    for path in POSITIVE:
        sec, key = path.split(".")
        if not cfg[sec][key] > 0:
            raise ConfigError(f"config field {path!r} must be positive, got {cfg[sec][key]!r}")
    ds = cfg["dataset"]
    if not 0 < ds["test_fraction"] < 1:
        raise ConfigError(f"config field 'dataset.test_fraction' must be in (0, 1), got {ds['test_fraction']}")
    if not ds["theta_hi"] > ds["theta_lo"] > 0:
        raise ConfigError("config field 'dataset.theta_lo' must satisfy 0 < theta_lo < theta_hi")
    if ds["noise_sigma"] < 0:
        raise ConfigError("config field 'dataset.noise_sigma' must be >= 0")
    if ds["num_classes"] < 2:
        raise ConfigError("config field 'dataset.num_classes' must be >= 2")
    if ds["generator"] == "two_spirals" and ds["num_classes"] != 2:
        raise ConfigError("config field 'dataset.num_classes' must be 2 for two_spirals")
    if ds["generator"] == "gaussian_mixture" and ds["k_components"] < ds["num_classes"]:
        raise ConfigError("config field 'dataset.k_components' must be >= dataset.num_classes")
    beta = cfg["codebook"]["beta"]
    if beta is not None and not beta > 0:
        raise ConfigError(f"config field 'codebook.beta' must be positive, got {beta}")
    if not cfg["network"]["hidden"] or min(cfg["network"]["hidden"]) < 1:
        raise ConfigError("config field 'network.hidden' must be a non-empty list of positive widths")
    steps = cfg["sweep"]["steps"]
    if not steps or min(steps) < 1 or any(b <= a for a, b in zip(steps, steps[1:])):
        raise ConfigError("config field 'sweep.steps' must be a strictly increasing list of positive ints")
    if not isinstance(cfg["seed"], int) or isinstance(cfg["seed"], bool) or cfg["seed"] < 0:
        raise ConfigError(f"config field 'seed' must be a non-negative integer, got {cfg['seed']!r}")
    return cfg


def resolve(overrides: dict | None = None, seed: int | None = None) -> dict:
    cfg = copy.deepcopy(DEFAULTS)
    if overrides:
        if not isinstance(overrides, dict):
            raise ConfigError("config file must contain a JSON object")
        _merge(cfg, overrides)
    if seed is not None:
        cfg["seed"] = seed
    return validate(cfg)


def load(path: str | Path) -> dict:
    try:
        return json.loads(Path(path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: not valid JSON ({exc})") from exc


def dumps(cfg: dict) -> str:
    return json.dumps(cfg, indent=2, sort_keys=True) + "\n"
