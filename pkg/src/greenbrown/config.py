"""Experiment configuration: packaged presets, user overrides, hashing."""

import copy
import hashlib
import json
from importlib import resources

import numpy as np
import yaml


class ConfigError(ValueError):
    pass


def load_presets():
    text = resources.files("greenbrown").joinpath("presets.yaml").read_text()
    return yaml.safe_load(text)


def deep_merge(base, override):
    out = copy.deepcopy(base)
    for key, val in (override or {}).items():
        if isinstance(val, dict) and isinstance(out.get(key), dict):
            out[key] = deep_merge(out[key], val)
        else:
            out[key] = copy.deepcopy(val)
    return out


def load_config(path=None):
    """Presets merged with the YAML file at ``path`` (if given)."""
    cfg = load_presets()
    if path is None:
        return cfg
    try:
        with open(path) as fh:
            user = yaml.safe_load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    except yaml.YAMLError as exc:
        raise ConfigError(f"invalid YAML in {path}: {exc}") from exc
    if user is None:
        return cfg
    if not isinstance(user, dict):
        raise ConfigError(f"config {path} must be a mapping at top level")
    return deep_merge(cfg, user)


def config_hash(cfg):
    blob = json.dumps(cfg, sort_keys=True, separators=(",", ":"), default=str)
    return hashlib.sha256(blob.encode()).hexdigest()[:16]


def grid(spec):
    """A linspace described by {start, stop, num}, or an explicit list."""
    if isinstance(spec, (list, tuple)):
        return np.asarray(spec, dtype=float)
    try:
        return np.linspace(float(spec["start"]), float(spec["stop"]), int(spec["num"]))
    except (KeyError, TypeError, ValueError) as exc:
        raise ConfigError(f"bad grid specification {spec!r}") from exc


def select(block, names, what):
    """Sub-mapping of ``block`` restricted to ``names`` (all when empty)."""
    if not names:
        return dict(block)
    unknown = [n for n in names if n not in block]
    if unknown:
        raise ConfigError(f"unknown {what} {', '.join(unknown)}; presets: {', '.join(block)}")
    return {n: block[n] for n in names}
