"""Experiment configuration: JSON with dotted keys, defaults, validation.

A config file is a flat JSON object whose keys use dotted names, e.g.

    {
      "model.preset": "1d-tanh-friction",
      "eps_grid": [0.2, 0.05, 0.0125],
      "n_particles": 2000,
      "bump.center": 0.0
    }

Unknown keys are rejected.  `threads`, `out_dir` and `format` control how a
run executes and where files land; they never influence the numbers, so
they are excluded from the config echo embedded in reports.
"""

from __future__ import annotations

import dataclasses
import json
import math
import os
from dataclasses import dataclass

from .dynamics import SCHEMES
from .errors import ConfigError
from .model import make_preset

THREADS_ENV_VAR = "SMALLMASS_THREADS"

FORMATS = ("csv", "json")
PAIR_PRECISIONS = ("single", "double")


def _float_tuple(value, key):
    try:
        return tuple(float(v) for v in value)
    except (TypeError, ValueError):
        raise ConfigError(f"{key} must be a list of numbers, got {value!r}") from None


def _is_multiple(a, b, *, rel=1e-9):
    k = round(a / b)
    return k >= 1 and abs(k * b - a) <= rel * max(1.0, abs(a))


@dataclass(frozen=True)
class ExperimentConfig:
    """All knobs of the experiment harness, with validated defaults."""

    preset: str = "1d-tanh-friction"
    eps_grid: tuple = (0.2, 0.05, 0.0125)
    n_particles: int = 2000
    replicas: int = 8
    horizon: float = 1.0
    s0: float = 0.2
    dt_fine: float = 1e-4
    dt_overdamped: float = 1e-3
    scheme: str = "exponential"
    checkpoint_times: tuple = (0.25, 0.5, 1.0)
    snapshot_dt: float = 0.05
    delta_coeff: float = 10.0
    window_floor_steps: int = 10
    bump_center: float = 0.0
    bump_halfwidth: float = 2.0
    frozen_x: float = 0.7
    frozen_force: float = 1.0
    frozen_t: float = 0.2
    frozen_eps: tuple = (0.1, 0.05, 0.025, 0.0125)
    holder_lags: tuple = (0.05, 0.1, 0.15, 0.2, 0.25, 0.3, 0.35, 0.4)
    fields_x_min: float = -4.0
    fields_x_max: float = 4.0
    fields_n_bins: int = 40
    pair_precision: str = "single"
    seed: int = 20240801
    threads: int | None = None
    out_dir: str = "out"
    format: str = "csv"

    def __post_init__(self):
        self.validate()

    # ----- schema -------------------------------------------------------

    # dotted JSON key -> attribute
    KEYMAP = {
        "model.preset": "preset",
        "eps_grid": "eps_grid",
        "n_particles": "n_particles",
        "replicas": "replicas",
        "T": "horizon",
        "s0": "s0",
        "dt_fine": "dt_fine",
        "dt_overdamped": "dt_overdamped",
        "scheme": "scheme",
        "checkpoint_times": "checkpoint_times",
        "snapshot_dt": "snapshot_dt",
        "delta_coeff": "delta_coeff",
        "window_floor_steps": "window_floor_steps",
        "bump.center": "bump_center",
        "bump.halfwidth": "bump_halfwidth",
        "frozen.x": "frozen_x",
        "frozen.force": "frozen_force",
        "frozen.t": "frozen_t",
        "frozen.eps_grid": "frozen_eps",
        "holder.lags": "holder_lags",
        "fields.x_min": "fields_x_min",
        "fields.x_max": "fields_x_max",
        "fields.n_bins": "fields_n_bins",
        "pair_precision": "pair_precision",
        "seed": "seed",
        "threads": "threads",
        "out_dir": "out_dir",
        "format": "format",
    }

    _TUPLE_KEYS = ("eps_grid", "checkpoint_times", "frozen_eps", "holder_lags")
    _INT_KEYS = ("n_particles", "replicas", "window_floor_steps", "fields_n_bins", "seed")
    _STR_KEYS = ("preset", "scheme", "pair_precision", "out_dir", "format")
    # keys that tune execution, not results; kept out of the report echo
    _ENVIRONMENT_KEYS = ("threads", "out_dir", "format")

    @classmethod
    def from_mapping(cls, mapping):
        values = {}
        for key, raw in dict(mapping).items():
            attr = cls.KEYMAP.get(key)
            if attr is None:
                known = ", ".join(sorted(cls.KEYMAP))
                raise ConfigError(f"unknown config key {key!r}; known keys: {known}")
            if attr in cls._TUPLE_KEYS:
                values[attr] = _float_tuple(raw, key)
            elif attr in cls._INT_KEYS:
                if raw is not None and int(raw) != raw:
                    raise ConfigError(f"{key} must be an integer, got {raw!r}")
                values[attr] = int(raw)
            elif attr == "threads":
                values[attr] = None if raw is None else int(raw)
            elif attr in cls._STR_KEYS:
                values[attr] = str(raw)
            else:
                values[attr] = float(raw)
        return cls(**values)

    @classmethod
    def from_json_file(cls, path):
        try:
            with open(path, "r", encoding="utf-8") as fh:
                mapping = json.load(fh)
        except OSError as exc:
            raise ConfigError(f"cannot read config file {path!r}: {exc}") from None
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config file {path!r} is not valid JSON: {exc}") from None
        if not isinstance(mapping, dict):
            raise ConfigError(f"config file {path!r} must hold a JSON object")
        return cls.from_mapping(mapping)

    def replace(self, **changes):
        return dataclasses.replace(self, **changes)

    def echo(self):
        """Canonical dotted-key dict of every result-affecting field."""
        attr_to_key = {attr: key for key, attr in self.KEYMAP.items()}
        out = {}
        for field in dataclasses.fields(self):
            if field.name in self._ENVIRONMENT_KEYS:
                continue
            value = getattr(self, field.name)
            if isinstance(value, tuple):
                value = list(value)
            out[attr_to_key[field.name]] = value
        return out

    # ----- validation ---------------------------------------------------

    def validate(self):
        make_preset(self.preset)  # raises ConfigError for unknown names
        if self.scheme not in SCHEMES:
            raise ConfigError(f"unknown scheme {self.scheme!r}; choose from {SCHEMES}")
        if not self.eps_grid:
            raise ConfigError("eps_grid must be non-empty")
        if any(e <= 0 for e in self.eps_grid):
            raise ConfigError("eps_grid entries must be positive")
        if any(a <= b for a, b in zip(self.eps_grid, self.eps_grid[1:])):
            raise ConfigError(f"eps_grid must be strictly decreasing, got {self.eps_grid}")
        if self.n_particles < 1 or self.replicas < 1:
            raise ConfigError("n_particles and replicas must be >= 1")
        if not (0.0 <= self.s0 < self.horizon):
            raise ConfigError(f"need 0 <= s0 < T, got s0={self.s0}, T={self.horizon}")
        if self.dt_fine <= 0 or self.dt_overdamped <= 0:
            raise ConfigError("dt_fine and dt_overdamped must be positive")
        if self.s0 > 0 and not _is_multiple(self.s0, self.dt_fine):
            raise ConfigError(f"s0={self.s0} must be a multiple of dt_fine={self.dt_fine}")
        if not _is_multiple(self.dt_overdamped, self.dt_fine):
            raise ConfigError(
                f"dt_overdamped={self.dt_overdamped} must be an integer multiple "
                f"of dt_fine={self.dt_fine} (noise grids are shared by coarsening)"
            )
        for name, dt in (("dt_fine", self.dt_fine), ("dt_overdamped", self.dt_overdamped)):
            if not _is_multiple(self.horizon, dt):
                raise ConfigError(f"T={self.horizon} must be an integer multiple of {name}={dt}")
        if not self.checkpoint_times:
            raise ConfigError("checkpoint_times must be non-empty")
        if any(a >= b for a, b in zip(self.checkpoint_times, self.checkpoint_times[1:])):
            raise ConfigError("checkpoint_times must be strictly increasing")
        for t in self.checkpoint_times:
            if not (self.s0 <= t <= self.horizon + 1e-12):
                raise ConfigError(
                    f"checkpoint time {t} outside the measurement span [s0, T] = "
                    f"[{self.s0}, {self.horizon}]"
                )
            if not (_is_multiple(t, self.dt_fine) and _is_multiple(t, self.dt_overdamped)):
                raise ConfigError(
                    f"checkpoint time {t} must be a multiple of both dt_fine and dt_overdamped"
                )
        if self.snapshot_dt <= 0 or not _is_multiple(self.snapshot_dt, self.dt_fine):
            raise ConfigError("snapshot_dt must be a positive multiple of dt_fine")
        if self.snapshot_dt > self.horizon:
            raise ConfigError("snapshot_dt must not exceed T")
        if self.delta_coeff <= 0 or self.window_floor_steps < 1:
            raise ConfigError("delta_coeff must be positive and window_floor_steps >= 1")
        if self.bump_halfwidth <= 0:
            raise ConfigError("bump.halfwidth must be positive")
        if self.frozen_t <= 0:
            raise ConfigError("frozen.t must be positive")
        if len(self.frozen_eps) < 3:
            raise ConfigError("frozen.eps_grid needs at least 3 entries for an order fit")
        if any(e <= 0 for e in self.frozen_eps) or any(
            a <= b for a, b in zip(self.frozen_eps, self.frozen_eps[1:])
        ):
            raise ConfigError("frozen.eps_grid must be positive and strictly decreasing")
        if not self.holder_lags:
            raise ConfigError("holder.lags must be non-empty")
        if any(a >= b for a, b in zip(self.holder_lags, self.holder_lags[1:])):
            raise ConfigError("holder.lags must be strictly increasing")
        for lag in self.holder_lags:
            if lag <= 0 or not _is_multiple(lag, self.snapshot_dt):
                raise ConfigError(f"holder lag {lag} must be a positive multiple of snapshot_dt")
        if self.holder_lags[-1] > self.horizon - self.s0 + 1e-12:
            raise ConfigError("largest holder lag must fit inside [s0, T]")
        if self.fields_n_bins < 1 or self.fields_x_max <= self.fields_x_min:
            raise ConfigError("fields grid needs x_max > x_min and n_bins >= 1")
        if self.pair_precision not in PAIR_PRECISIONS:
            raise ConfigError(
                f"pair_precision must be one of {PAIR_PRECISIONS}, got {self.pair_precision!r}"
            )
        if self.format not in FORMATS:
            raise ConfigError(f"format must be one of {FORMATS}, got {self.format!r}")
        if not (0 <= self.seed < 2**64):
            raise ConfigError("seed must fit in an unsigned 64-bit integer")
        if self.threads is not None and self.threads < 1:
            raise ConfigError("threads must be >= 1")
        if math.isnan(self.horizon) or math.isinf(self.horizon):
            raise ConfigError("T must be finite")

    # ----- execution knobs ----------------------------------------------

    def resolved_threads(self):
        """threads field if set, else the environment default, else 1."""
        if self.threads is not None:
            return self.threads
        env = os.environ.get(THREADS_ENV_VAR)
        if env:
            try:
                n = int(env)
            except ValueError:
                raise ConfigError(
                    f"{THREADS_ENV_VAR} must be an integer, got {env!r}"
                ) from None
            if n < 1:
                raise ConfigError(f"{THREADS_ENV_VAR} must be >= 1, got {n}")
            return n
        return 1
