"""
Layered variable lookup: environment, -e KEY=VALUE extras, document, default
"""

import argparse
import os

import psutil

from dephase_lab.errors import ConfigError

ENV_PREFIX = 'DEPHASE_LAB_'
THREADS_VAR = 'DEPHASE_LAB_THREADS'


def parse_extra_vars(argv=None):
    parser = argparse.ArgumentParser(add_help=False)
    parser.add_argument('-e', '--extra', action='append', default=[], help='Extra KEY=VALUE pairs')
    args, _unknown = parser.parse_known_args(argv if argv is not None else [])
    extra_vars = {}
    for item in args.extra:
        if '=' in item:
            k, v = item.split('=', 1)
            extra_vars[k.strip()] = v.strip()
    return extra_vars


def get_var(name, spec, default=None, extra_vars=None):
    env_val = os.environ.get(ENV_PREFIX + name.upper())
    if env_val is not None and env_val != "":
        return env_val
    extra_val = (extra_vars or {}).get(name)
    if extra_val is not None and extra_val != "":
        return extra_val
    spec_val = spec.get(name)
    if spec_val is not None and spec_val != "":
        return spec_val
    return default


def thread_cap():
    """Worker count for parallel restarts."""
    raw = os.environ.get(THREADS_VAR)
    if raw is None or raw.strip() == "":
        return psutil.cpu_count(logical=True) or 1
    try:
        value = int(raw)
    except ValueError:
        raise ConfigError(f"{THREADS_VAR} must be a positive integer, got {raw!r}")
    if value < 1:
        raise ConfigError(f"{THREADS_VAR} must be a positive integer, got {value}")
    return value
