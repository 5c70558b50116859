"""Experiment configuration: flat, strictly-typed TOML.

A config file is a single flat table of scalars and lists; nested tables
are rejected, unknown keys are a hard error naming every offender, and
each value must match its declared type.  Environment variables with the
``GSDDE_`` prefix mirror the command-line flags (``GSDDE_CONFIG``,
``GSDDE_SEED``, ``GSDDE_OUT``, ``GSDDE_WORKERS``); flags beat environment,
environment beats file values.
"""

from __future__ import annotations

import dataclasses
import math
import os
from dataclasses import dataclass

import numpy as np
import tomli

from .certify import PARAM_KINDS, StabilityParams
from .detect import FitConfig
from .model import DelayGrid, GParams, InitialSegment, LinearSystem

__all__ = [
    "ConfigError",
    "ExperimentConfig",
    "PIPELINES",
    "ENV_PREFIX",
    "env_overrides",
]

PIPELINES = ("simulate", "fit", "certify", "chain", "compare", "convergence")
ENV_PREFIX = "GSDDE_"

# key -> (type tag, default); tags: str, int, float, matrix (scalar or
# square row-list), vector (scalar or row), int_list
_SCHEMA = {
    "pipeline": ("str", "simulate"),
    "dimension": ("int", 1),
    "f_matrix_a": ("matrix", 0.0),
    "f_matrix_b": ("matrix", 0.0),
    "f_offset": ("vector", 0.0),
    "g_matrix_a": ("matrix", 0.0),
    "g_matrix_b": ("matrix", 0.0),
    "g_offset": ("vector", 0.0),
    "h_matrix_a": ("matrix", 0.0),
    "h_matrix_b": ("matrix", 0.0),
    "h_offset": ("vector", 0.0),
    "sigma_lo": ("float", 0.5),
    "sigma_hi": ("float", 1.0),
    "tau_time": ("float", 0.25),
    "steps_per_delay": ("int", 8),
    "horizon_time": ("float", 2.0),
    "initial_kind": ("str", "constant"),
    "initial_value": ("vector", 1.0),
    "initial_ramp_start": ("vector", 1.0),
    "initial_ramp_end": ("vector", 1.0),
    "moment_order_p": ("float", 2.0),
    "scenario_count": ("int", 8),
    "paths_per_scenario": ("int", 2000),
    "master_seed": ("int", 0),
    "confidence_delta": ("float", 0.5),
    "refine_factor": ("int", 8),
    "explosion_cap": ("float", 1e12),
    "workers": ("int", 0),
    "out_dir": ("str", "out"),
    "fit_tail_fraction": ("float", 0.2),
    "fit_window_lo": ("float", 0.0),
    "fit_window_hi": ("float", 0.6),
    "fit_log_floor": ("float", 1e-12),
    "convergence_m_list": ("int_list", (4, 8, 16, 32, 64)),
    "start_kind": ("str", "SDDE"),
    "start_prefactor_m": ("float", 0.0),
    "start_rate_lambda": ("float", 0.0),
    "start_offset_d": ("float", 0.0),
}


class ConfigError(ValueError):
    """A configuration problem: unknown key, bad type, or bad value."""


def _is_number(v) -> bool:
    return isinstance(v, (int, float)) and not isinstance(v, bool)


def _coerce(key: str, tag: str, value):
    if tag == "str":
        if not isinstance(value, str):
            raise ConfigError(f"config key '{key}' must be a string")
        return value
    if tag == "int":
        if not (isinstance(value, int) and not isinstance(value, bool)):
            raise ConfigError(f"config key '{key}' must be an integer")
        return value
    if tag == "float":
        if not _is_number(value):
            raise ConfigError(f"config key '{key}' must be a number")
        return float(value)
    if tag == "int_list":
        if (
            not isinstance(value, (list, tuple))
            or not value
            or not all(isinstance(v, int) and not isinstance(v, bool) for v in value)
        ):
            raise ConfigError(f"config key '{key}' must be a non-empty list of integers")
        return tuple(value)
    if tag == "vector":
        if _is_number(value):
            return float(value)
        if isinstance(value, (list, tuple)) and value and all(map(_is_number, value)):
            return tuple(float(v) for v in value)
        raise ConfigError(f"config key '{key}' must be a number or a list of numbers")
    if tag == "matrix":
        if _is_number(value):
            return float(value)
        if (
            isinstance(value, (list, tuple))
            and value
            and all(
                isinstance(row, (list, tuple)) and row and all(map(_is_number, row))
                for row in value
            )
        ):
            return tuple(tuple(float(v) for v in row) for row in value)
        raise ConfigError(
            f"config key '{key}' must be a number or a list of rows of numbers"
        )
    raise AssertionError(f"unhandled tag {tag}")


@dataclass(frozen=True)
class ExperimentConfig:
    """One experiment: the system, the grids, the estimator, the pipeline."""

    pipeline: str = "simulate"
    dimension: int = 1
    f_matrix_a: object = 0.0
    f_matrix_b: object = 0.0
    f_offset: object = 0.0
    g_matrix_a: object = 0.0
    g_matrix_b: object = 0.0
    g_offset: object = 0.0
    h_matrix_a: object = 0.0
    h_matrix_b: object = 0.0
    h_offset: object = 0.0
    sigma_lo: float = 0.5
    sigma_hi: float = 1.0
    tau_time: float = 0.25
    steps_per_delay: int = 8
    horizon_time: float = 2.0
    initial_kind: str = "constant"
    initial_value: object = 1.0
    initial_ramp_start: object = 1.0
    initial_ramp_end: object = 1.0
    moment_order_p: float = 2.0
    scenario_count: int = 8
    paths_per_scenario: int = 2000
    master_seed: int = 0
    confidence_delta: float = 0.5
    refine_factor: int = 8
    explosion_cap: float = 1e12
    workers: int = 0
    out_dir: str = "out"
    fit_tail_fraction: float = 0.2
    fit_window_lo: float = 0.0
    fit_window_hi: float = 0.6
    fit_log_floor: float = 1e-12
    convergence_m_list: tuple = (4, 8, 16, 32, 64)
    start_kind: str = "SDDE"
    start_prefactor_m: float = 0.0
    start_rate_lambda: float = 0.0
    start_offset_d: float = 0.0

    @classmethod
    def from_dict(cls, raw: dict) -> "ExperimentConfig":
        """Build from a flat mapping, rejecting unknown keys and bad types."""
        unknown = sorted(set(raw) - set(_SCHEMA))
        if unknown:
            raise ConfigError(
                "unknown config keys: " + ", ".join(unknown)
            )
        values = {}
        for key, value in raw.items():
            if isinstance(value, dict):
                raise ConfigError(
                    f"config key '{key}' is a table; the config must be flat"
                )
            tag, _default = _SCHEMA[key]
            values[key] = _coerce(key, tag, value)
        cfg = cls(**values)
        cfg.validate()
        return cfg

    @classmethod
    def from_toml(cls, path) -> "ExperimentConfig":
        try:
            with open(path, "rb") as fh:
                raw = tomli.load(fh)
        except OSError as err:
            raise ConfigError(f"cannot read config file {path}: {err}") from None
        except tomli.TOMLDecodeError as err:
            raise ConfigError(f"config file {path} is not valid TOML: {err}") from None
        return cls.from_dict(raw)

    def validate(self) -> None:
        if self.pipeline not in PIPELINES:
            raise ConfigError(f"pipeline must be one of {PIPELINES}")
        if self.initial_kind not in ("constant", "ramp"):
            raise ConfigError("initial_kind must be 'constant' or 'ramp'")
        if self.start_kind not in PARAM_KINDS:
            raise ConfigError(f"start_kind must be one of {PARAM_KINDS}")
        if self.dimension < 1:
            raise ConfigError("dimension must be >= 1")
        if self.steps_per_delay < 1:
            raise ConfigError("steps_per_delay must be >= 1")
        if self.scenario_count < 1:
            raise ConfigError("scenario_count must be >= 1")
        if self.paths_per_scenario < 1:
            raise ConfigError("paths_per_scenario must be >= 1")
        if self.master_seed < 0:
            raise ConfigError("master_seed must be >= 0")
        if self.refine_factor < 1:
            raise ConfigError("refine_factor must be >= 1")
        if self.workers < 0:
            raise ConfigError("workers must be >= 0")
        if not 0.0 < self.confidence_delta < 1.0:
            raise ConfigError("confidence_delta must lie in (0, 1)")
        if not (math.isfinite(self.moment_order_p) and self.moment_order_p >= 2):
            raise ConfigError("moment_order_p must be >= 2")
        if any(m < 1 for m in self.convergence_m_list):
            raise ConfigError("convergence_m_list entries must be >= 1")

    # -- builders -----------------------------------------------------------

    def _wrap(self, build):
        try:
            return build()
        except ValueError as err:
            raise ConfigError(str(err)) from None

    def build_system(self) -> LinearSystem:
        return self._wrap(
            lambda: LinearSystem.from_matrices(
                dimension=self.dimension,
                a_f=self.f_matrix_a, b_f=self.f_matrix_b, c_f=self.f_offset,
                a_g=self.g_matrix_a, b_g=self.g_matrix_b, c_g=self.g_offset,
                a_h=self.h_matrix_a, b_h=self.h_matrix_b, c_h=self.h_offset,
            )
        )

    def build_gparams(self) -> GParams:
        return self._wrap(lambda: GParams(self.sigma_lo, self.sigma_hi))

    def build_grid(self) -> DelayGrid:
        return self._wrap(
            lambda: DelayGrid(self.tau_time, self.steps_per_delay, self.horizon_time)
        )

    def _vector(self, value) -> np.ndarray:
        arr = np.atleast_1d(np.asarray(value, dtype=float))
        if arr.shape == (1,) and self.dimension > 1:
            arr = np.full(self.dimension, arr[0])
        if arr.shape != (self.dimension,):
            raise ConfigError(
                f"vector value {value!r} does not match dimension {self.dimension}"
            )
        return arr

    def build_initial(self) -> InitialSegment:
        if self.initial_kind == "constant":
            value = self._vector(self.initial_value)
            return self._wrap(
                lambda: InitialSegment.constant(
                    value, self.tau_time, self.steps_per_delay
                )
            )
        start = self._vector(self.initial_ramp_start)
        end = self._vector(self.initial_ramp_end)
        return self._wrap(
            lambda: InitialSegment.ramp(
                start, end, self.tau_time, self.steps_per_delay
            )
        )

    def build_fit_config(self) -> FitConfig:
        return self._wrap(
            lambda: FitConfig(
                tail_fraction=self.fit_tail_fraction,
                decay_window=(self.fit_window_lo, self.fit_window_hi),
                log_floor=self.fit_log_floor,
            )
        )

    def start_params(self):
        """StabilityParams from the start_* keys, or None if unset."""
        if self.start_prefactor_m == 0.0 and self.start_rate_lambda == 0.0:
            return None
        return self._wrap(
            lambda: StabilityParams(
                self.start_prefactor_m,
                self.start_rate_lambda,
                self.start_offset_d,
                self.start_kind,
            )
        )

    def to_json_dict(self) -> dict:
        out = {}
        for f in dataclasses.fields(self):
            value = getattr(self, f.name)
            if isinstance(value, tuple):
                value = [list(v) if isinstance(v, tuple) else v for v in value]
            out[f.name] = value
        return out


def env_overrides(environ=None) -> dict:
    """Overrides drawn from GSDDE_CONFIG/GSDDE_SEED/GSDDE_OUT/GSDDE_WORKERS."""
    env = os.environ if environ is None else environ
    out = {}
    if env.get(ENV_PREFIX + "CONFIG"):
        out["config"] = env[ENV_PREFIX + "CONFIG"]
    for name, key in (("SEED", "master_seed"), ("WORKERS", "workers")):
        raw = env.get(ENV_PREFIX + name)
        if raw:
            try:
                out[key] = int(raw)
            except ValueError:
                raise ConfigError(
                    f"environment variable {ENV_PREFIX + name} must be an integer, "
                    f"got {raw!r}"
                ) from None
    if env.get(ENV_PREFIX + "OUT"):
        out["out_dir"] = env[ENV_PREFIX + "OUT"]
    return out
