"""
Configuration defaults and YAML loading
"""
import copy
import logging

import yaml

from errors import InputError

logger = logging.getLogger(__name__)


# Defaults per section; config.yaml ships the same table
DEFAULTS = {
    "logging": {
        "level": "INFO",
        "format": "%(asctime)s %(levelname)s %(name)s: %(message)s",
    },
    "walk": {
        "launch_factor": 64.0,  # launch circle radius / circumscribed radius
        "stop_factor": 1.0e-6,  # eps_stop / tree diameter
        "vertex_factor": 10.0,  # eps_vert / eps_stop
        "escalations": 3,
        "max_steps": 100000,
        "bins": 64,
        "seed": 0,
        "chunk_size": 16384,
        "workers": 1,
        "progress": False,
    },
    "solve": {
        "tol": 1.0e-12,
        "max_iter": 200,
        "backtrack": 0.5,
        "min_step": 2.0 ** -20,
        "perturbation": 0.05,
        "max_retries": 4,
        "seed": 0,
        "continuation": True,
    },
    "trace": {
        "tol": 1.0e-12,
        "snap": 1.0e-7,
        "min_points": 32,
        "max_turn_deg": 10.0,
        "max_steps": 20000,
    },
    "balance": {
        "delta_exp": 4,
        "group_size": 16,
        "min_hits": 100,
        "max_teeth": 200000,
        "faithful_segments": False,
    },
    "pipeline": {
        "depth": 2,
        "max_depth": 5,
        "walkers": 100000,
        "seed": 0,
        "max_solve_degree": 160,
        "strict": False,
        "catalog_max": 8,
    },
    "render": {
        "stroke_width": 1.5,
        "vertex_radius": 2.0,
        "png_size": 800,
    },
}


def _merge(base, override, path=""):
    """Deep-merge override into a copy of base, rejecting unknown keys"""
    merged = copy.deepcopy(base)
    for key, value in override.items():
        where = f"{path}.{key}" if path else key
        if key not in base:
            raise InputError(f"unknown configuration key '{where}'")
        if isinstance(base[key], dict):
            if not isinstance(value, dict):
                raise InputError(f"configuration section '{where}' must be a mapping")
            merged[key] = _merge(base[key], value, where)
        else:
            merged[key] = value
    return merged


def load_config(path=None):
    """Load a YAML file over the defaults; no path gives the defaults"""
    if path is None:
        return copy.deepcopy(DEFAULTS)
    try:
        with open(path, "r", encoding="utf-8") as handle:
            data = yaml.safe_load(handle) or {}
    except OSError as exc:
        raise InputError(f"cannot read configuration {path}: {exc}") from exc
    except yaml.YAMLError as exc:
        raise InputError(f"invalid YAML in {path}: {exc}") from exc
    if not isinstance(data, dict):
        raise InputError(f"configuration {path} must be a mapping")
    logger.debug("loaded configuration from %s", path)
    return _merge(DEFAULTS, data)


def section(cfg, name):
    """Return one section, falling back to defaults"""
    if cfg is None:
        return copy.deepcopy(DEFAULTS[name])
    return cfg.get(name, DEFAULTS[name])
