#!/usr/bin/python
# -*- coding:utf-8 -*-
"""
Runtime configuration: size guards, coefficient constants and defaults.

Values come from the environment (a `.env` file is honoured) and may be
overridden by a KEY=value config file passed on the command line.
"""
import os
import logging
from dotenv import load_dotenv, dotenv_values

load_dotenv()

# name -> (env var, type, default)
_FIELDS = {
    'dense_guard': ('LH_DENSE_GUARD', int, 14),
    'lanczos_guard': ('LH_LANCZOS_GUARD', int, 26),
    'sat_guard': ('LH_SAT_GUARD', int, 30),
    'statevector_guard': ('LH_STATEVECTOR_GUARD', int, 6),
    'statevector_amplitude_guard': ('LH_STATEVECTOR_AMPLITUDE_GUARD', int, 1 << 22),
    'clock_exhaustive_guard': ('LH_CLOCK_EXHAUSTIVE_GUARD', int, 14),
    'coeff_c1': ('LH_COEFF_C1', float, 16.0),
    'coeff_c2': ('LH_COEFF_C2', float, 16.0),
    'epsilon': ('LH_EPSILON', float, 0.125),
    'seed': ('LH_SEED', int, 0),
    'qpf_confidence': ('LH_QPF_CONFIDENCE', float, 0.99),
    'qpf_grid_guard': ('LH_QPF_GRID_GUARD', int, 2048),
    'lanczos_max_iters': ('LH_LANCZOS_MAX_ITERS', int, 300),
    'lanczos_tol': ('LH_LANCZOS_TOL', float, 1e-9),
}


class Settings:
    """Guards and tunables shared by every service"""

    def __init__(self, overrides=None):
        """
        Initialize settings from the environment

        Args:
            overrides (dict, optional): Raw KEY=value pairs that win over the environment
        """
        self.logger = logging.getLogger(__name__)
        self.reload(overrides)

    def reload(self, overrides=None):
        """
        Re-read every field from the environment and the given overrides

        Args:
            overrides (dict, optional): Raw KEY=value pairs keyed by env var name
        """
        overrides = overrides or {}
        for name, (env_name, cast, default) in _FIELDS.items():
            raw = overrides.get(env_name, os.getenv(env_name))
            setattr(self, name, self._parse(env_name, raw, cast, default))

    def load_file(self, path):
        """
        Apply a KEY=value config file on top of the environment

        Args:
            path (str): Config file path

        Raises:
            OSError: If the file does not exist
        """
        if not os.path.isfile(path):
            raise FileNotFoundError(f"config file not found: {path}")
        values = dotenv_values(path)
        unknown = set(values) - {env for env, _, _ in _FIELDS.values()}
        if unknown:
            self.logger.warning(f"Ignoring unknown config keys: {sorted(unknown)}")
        self.reload(values)
        self.logger.info(f"Loaded config file {path}")

    def _parse(self, env_name, raw, cast, default):
        if raw is None or raw == '':
            return default
        try:
            return cast(raw)
        except (TypeError, ValueError):
            self.logger.warning(f"Invalid value for {env_name}: {raw!r}, using {default}")
            return default

    def as_dict(self):
        """
        Snapshot of every field

        Returns:
            dict: Field name to value
        """
        return {name: getattr(self, name) for name in _FIELDS}


# Global settings instance
settings = Settings()
