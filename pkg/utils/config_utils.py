import logging
from dataclasses import fields

import yaml

from barropt_logging.logger_config import logger
from utils.errors import ConfigError


logger = logging.getLogger('utils.config_utils')


def load_config(config_path):
    try:
        with open(config_path, 'r') as f:
            config = yaml.safe_load(f)
    except FileNotFoundError as e:
        raise ConfigError(f"config file not found: {config_path}") from e
    except yaml.YAMLError as e:
        raise ConfigError(f"cannot parse {config_path}: {e}") from e
    if not isinstance(config, dict) or 'global' not in config:
        raise ConfigError(f"{config_path} has no 'global' block")
    return config


def build_options(cls, block, **overrides):
    """
    Instantiate the frozen dataclass `cls` from the keys of `block` it knows
    about; `overrides` that are not None win.
    """
    known = {f.name for f in fields(cls)}
    values = {k: v for k, v in (block or {}).items() if k in known}
    values.update({k: v for k, v in overrides.items() if v is not None and k in known})
    try:
        return cls(**values)
    except TypeError as e:
        raise ConfigError(f"invalid {cls.__name__} settings {values}: {e}") from e


def section(config, name):
    """A sub-block of config['global'] (e.g. 'search', 'hjb', 'simulation')."""
    return (config or {}).get('global', {}).get(name, {}) or {}
