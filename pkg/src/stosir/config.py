"""Experiment configuration: flat `key = value` files with section headers.

Three sections: [model] (rates and noise intensities), [incidence] (catalog
kind plus its coefficients), [run] (mode, grid, seed, paths, output).  Every
run must name an explicit master_seed; there is no wall-clock default, so any
config file pins its outputs byte-for-byte.
"""

from __future__ import annotations

import configparser
import dataclasses
from dataclasses import dataclass
from typing import Optional

from .model import (
    IncidenceModel,
    ModelParams,
    ParameterError,
    State,
    make_catalog_incidence,
)

MODES = ("threshold", "simulate", "classify", "replicate")

_MODEL_KEYS = ("a1", "b1", "b2", "sigma1", "sigma2")
_RUN_KEYS = ("mode", "horizon", "dt", "n_paths", "master_seed", "burn_in",
             "output_dir", "initial_s", "initial_i")


class ConfigError(ValueError):
    """Config parse or validation failure; message names the field."""


@dataclass(frozen=True)
class ExperimentConfig:
    params: ModelParams
    incidence: IncidenceModel
    incidence_kind: str
    coefficients: dict
    mode: Optional[str]
    horizon: Optional[float]
    dt: float
    n_paths: int
    master_seed: int
    burn_in: float
    output_dir: str
    initial: State

    def replace(self, **kw) -> "ExperimentConfig":
        return dataclasses.replace(self, **kw)


def _get_float(cp, section, key, default=None, required=False):
    if not cp.has_option(section, key):
        if required:
            raise ConfigError(f"[{section}] {key}: required field missing")
        return default
    raw = cp.get(section, key)
    try:
        return float(raw)
    except ValueError:
        raise ConfigError(f"[{section}] {key}: not a number: {raw!r}") from None


def _get_int(cp, section, key, default=None, required=False):
    if not cp.has_option(section, key):
        if required:
            raise ConfigError(f"[{section}] {key}: required field missing")
        return default
    raw = cp.get(section, key)
    try:
        return int(raw)
    except ValueError:
        raise ConfigError(f"[{section}] {key}: not an integer: {raw!r}") from None


def parse_config(text: str, source: str = "<config>") -> ExperimentConfig:
    cp = configparser.ConfigParser(inline_comment_prefixes=("#", ";"))
    try:
        cp.read_string(text, source=source)
    except configparser.Error as exc:
        raise ConfigError(f"{source}: {exc}") from None

    for section in cp.sections():
        if section not in ("model", "incidence", "run"):
            raise ConfigError(f"unknown section [{section}]")
    for section in ("model", "incidence", "run"):
        if not cp.has_section(section):
            raise ConfigError(f"missing section [{section}]")
    for key in cp.options("model"):
        if key not in _MODEL_KEYS:
            raise ConfigError(f"[model] {key}: unknown key")
    for key in cp.options("run"):
        if key not in _RUN_KEYS:
            raise ConfigError(f"[run] {key}: unknown key")

    model_vals = {k: _get_float(cp, "model", k, required=True)
                  for k in _MODEL_KEYS}
    try:
        params = ModelParams(**model_vals)
    except ParameterError as exc:
        raise ConfigError(f"[model] {exc}") from None

    if not cp.has_option("incidence", "kind"):
        raise ConfigError("[incidence] kind: required field missing")
    kind = cp.get("incidence", "kind").strip()
    coefficients = {k: _get_float(cp, "incidence", k, required=True)
                    for k in cp.options("incidence") if k != "kind"}
    try:
        incidence = make_catalog_incidence(kind, **coefficients)
    except ParameterError as exc:
        raise ConfigError(f"[incidence] {exc}") from None

    mode = cp.get("run", "mode").strip() if cp.has_option("run", "mode") else None
    if mode is not None and mode not in MODES:
        raise ConfigError(f"[run] mode: must be one of {MODES}, got {mode!r}")

    master_seed = _get_int(cp, "run", "master_seed", required=True)
    if master_seed < 0:
        raise ConfigError("[run] master_seed: must be nonnegative")

    dt = _get_float(cp, "run", "dt", default=1e-3)
    if dt <= 0:
        raise ConfigError("[run] dt: must be positive")
    horizon = _get_float(cp, "run", "horizon", default=None)
    if horizon is not None and horizon < dt:
        raise ConfigError("[run] horizon: must be at least dt")
    n_paths = _get_int(cp, "run", "n_paths", default=200)
    if n_paths < 1:
        raise ConfigError("[run] n_paths: must be at least 1")
    burn_in = _get_float(cp, "run", "burn_in", default=100.0)
    if burn_in < 0:
        raise ConfigError("[run] burn_in: must be nonnegative")
    if horizon is not None and burn_in >= horizon:
        raise ConfigError("[run] burn_in: must be below horizon")
    try:
        initial = State(
            s=_get_float(cp, "run", "initial_s", default=2.0),
            i=_get_float(cp, "run", "initial_i", default=1.0),
        )
    except ParameterError as exc:
        raise ConfigError(f"[run] initial: {exc}") from None

    return ExperimentConfig(
        params=params,
        incidence=incidence,
        incidence_kind=kind,
        coefficients=coefficients,
        mode=mode,
        horizon=horizon,
        dt=dt,
        n_paths=n_paths,
        master_seed=master_seed,
        burn_in=burn_in,
        output_dir=cp.get("run", "output_dir", fallback="out"),
        initial=initial,
    )


def load_config(path) -> ExperimentConfig:
    try:
        with open(path, "r") as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    return parse_config(text, source=str(path))


def apply_overrides(config: ExperimentConfig, *, seed=None, dt=None,
                    horizon=None, n_paths=None, output_dir=None) -> ExperimentConfig:
    """Apply CLI flag overrides on top of a parsed config."""
    kw = {}
    if seed is not None:
        if seed < 0:
            raise ConfigError("--seed: must be nonnegative")
        kw["master_seed"] = seed
    if dt is not None:
        if dt <= 0:
            raise ConfigError("--dt: must be positive")
        kw["dt"] = dt
    if horizon is not None:
        if horizon <= 0:
            raise ConfigError("--horizon: must be positive")
        kw["horizon"] = horizon
    if n_paths is not None:
        if n_paths < 1:
            raise ConfigError("--paths: must be at least 1")
        kw["n_paths"] = n_paths
    if output_dir is not None:
        kw["output_dir"] = str(output_dir)
    return config.replace(**kw) if kw else config
