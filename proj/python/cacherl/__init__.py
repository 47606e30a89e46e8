"""Caching-policy simulator: exact oracle, tabular and linear Q-learning, hyper-DQN."""

import json
import os

from . import _core
from ._core import ConfigError, leaf_cost, preset_names, top_m, zipf_profile

__all__ = [
    "ConfigError",
    "compare",
    "expand_config",
    "leaf_cost",
    "oracle",
    "preset",
    "preset_names",
    "random_chain",
    "run",
    "run_to_dir",
    "top_m",
    "zipf_profile",
]


def _text(config):
    return config if isinstance(config, str) else json.dumps(config)


def preset(name):
    return json.loads(_core.preset(name))


def expand_config(config):
    """Validated, fully expanded config with its hash."""
    return json.loads(_core.expand_config(_text(config)))


def run(config, threads=1):
    """One dict per seed: seed, cost, policies (column name -> list), summary."""
    return json.loads(_core.run(_text(config), threads))


def run_to_dir(config, out_dir, threads=1):
    return [str(p) for p in _core.run_to_dir(_text(config), os.fspath(out_dir), threads)]


def compare(paths, reference="nocache", samples=100, seed=0):
    summary, cdf = _core.compare([os.fspath(p) for p in paths], reference, samples, seed)
    return json.loads(summary), cdf


def oracle(config, seed=1):
    return json.loads(_core.oracle(_text(config), seed))


def random_chain(num_states, num_files, eta_lo, eta_hi, seed=0):
    return json.loads(_core.random_chain(num_states, num_files, eta_lo, eta_hi, seed))
