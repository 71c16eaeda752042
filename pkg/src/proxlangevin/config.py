"""Experiment configuration: flat key-value files plus CLI overrides.

A config file holds `key = value` lines (# starts a comment). Every
experiment declares its full key schema with types, defaults and range
checks; unknown keys are hard errors so typos cannot silently fall back
to defaults. A run manifest (JSON) embedding a resolved config is also
accepted wherever a config file is, which is what makes manifest-based
bit-exact reruns possible.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Optional

__all__ = ["ConfigError", "Field", "SCHEMAS", "EXPERIMENTS", "parse_kv_file",
           "resolve_config", "config_from_manifest"]


class ConfigError(ValueError):
    """Invalid, unknown or out-of-range configuration input."""


@dataclass(frozen=True)
class Field:
    """One configuration key: type, default and optional range check."""

    kind: str  # int | float | str | floats | flag
    default: object
    check: Optional[Callable[[object], bool]] = None
    help: str = ""


def _positive(v):
    return v > 0


def _nonnegative(v):
    return v >= 0


def _odd_positive(v):
    return v > 0 and v % 2 == 1


def _floats_nonneg(vs):
    return all(v >= 0 for v in vs)


def _floats_positive(vs):
    return all(v > 0 for v in vs)


_COMMON = {
    "seed": Field("int", 1234, _nonnegative, "base RNG seed"),
    "n_samples": Field("int", 10_000, _positive, "post-burn-in samples"),
    "burn_in": Field("int", 100, _nonnegative, "discarded initial samples"),
}

_IMAGE = {
    "image": Field("str", "phantom", None, "input image path or 'phantom'"),
    "image_size": Field("int", 64, lambda v: v >= 16 and v % 16 == 0,
                        "phantom side length (multiple of 16)"),
}

SCHEMAS: dict[str, dict[str, Field]] = {
    "toy1d": {
        **_COMMON,
        "n_chains": Field("int", 10_000, _positive, "parallel chains"),
        "n_iters": Field("int", 1000, _positive, "iterations per chain"),
        "gamma": Field("float", 0.25, _positive, "fixed step size"),
        "alpha": Field("float", 1.0, _positive, "prior scale"),
        "sigma": Field("float", 1.0, _positive, "noise std"),
        "y_obs": Field("float", 0.0, None, "scalar observation"),
        "eps_values": Field("floats", [0.0, 0.01, 0.1], _floats_nonneg,
                            "fixed prox accuracies"),
        "beta_values": Field("floats", [0.5, 1.0], _floats_positive,
                             "decay rates eps_k = k^-beta"),
        "c_prime": Field("float", 1.0, _positive,
                         "decaying-step constant, >= 1/lambda_F"),
        "n_checkpoints": Field("int", 16, _positive, "logarithmic checkpoints"),
        "init_mean": Field("float", 0.0, None, "initial law mean"),
        "init_std": Field("float", 1.0, _positive, "initial law std"),
        "mala_samples": Field("int", 1_000_000, _positive, "reference samples"),
        "mala_burn_in": Field("int", 10_000, _nonnegative, "reference burn-in"),
        "mala_gamma": Field("float", 0.5, _positive, "reference step size"),
    },
    "wavelet-deblur": {
        **_COMMON,
        **_IMAGE,
        "blur_size": Field("int", 5, _odd_positive, "blur kernel side"),
        "blur_std": Field("float", 1.5, _positive, "blur std in pixels"),
        "noise_sigma": Field("float", 0.05, _positive, "noise std"),
        "mu": Field("float", 10.0, _positive, "coefficient l1 weight"),
        "wavelet_levels": Field("int", 4, _positive, "transform depth"),
        "eps_tilde_values": Field(
            "floats", [0.0, 10 ** -0.1, 10 ** -0.5, 1e-2], _floats_nonneg,
            "relative accuracies (0 = exact soft threshold)"),
    },
    "tv-denoise": {
        **_COMMON,
        **_IMAGE,
        "noise_sigma": Field("float", 0.2, _positive, "noise std"),
        "mu": Field("float", 5.0, _positive, "TV weight"),
        "eps_tilde_values": Field("floats", [1.0, 0.1, 0.01], _floats_positive,
                                  "relative accuracies"),
        "ref_eps_tilde": Field("float", 1e-3, _positive,
                               "accuracy of the reference run"),
        "delta_values": Field("floats", [0.05, 0.02, 0.01], _floats_positive,
                              "relative-error thresholds for k*"),
        "max_inner": Field("int", 5000, _positive, "inner iteration cap"),
    },
    "tv-deblur": {
        **_COMMON,
        **_IMAGE,
        "blur_size": Field("int", 5, _odd_positive, "blur kernel side"),
        "blur_std": Field("float", 1.5, _positive, "blur std in pixels"),
        "noise_sigma": Field("float", 0.1, _positive, "noise std"),
        "mu": Field("float", 5.0, _positive, "TV weight"),
        "eps_tilde_values": Field("floats", [1.0, 1e-2, 1e-4], _floats_positive,
                                  "relative accuracies"),
        "max_inner": Field("int", 5000, _positive, "inner iteration cap"),
        "map_iters": Field("int", 300, _positive,
                           "proximal gradient iterations for the MAP"),
    },
    "poisson-deblur": {
        **_COMMON,
        **_IMAGE,
        "blur_size": Field("int", 5, _odd_positive, "uniform blur side"),
        "mean_intensity": Field("float", 2.0, _positive,
                                "target mean of the scaled image"),
        "background": Field("float", 0.02, _positive, "Poisson background"),
        "mu": Field("float", 1.0, _positive, "TV weight"),
        "fixed_burn_in": Field("int", 2000, _nonnegative,
                               "burn-in of the small-fixed-step chain"),
        "budget_small": Field("int", 1, _positive, "inner iterations (fast run)"),
        "budget_large": Field("int", 10, _positive, "inner iterations"),
        "bt_shrink": Field("float", 0.5, lambda v: 0 < v < 1, "backtracking shrink"),
        "bt_grow": Field("float", 2.0, lambda v: v > 1, "backtracking grow"),
        "acf_max_lag": Field("int", 400, _positive, "autocorrelation lags"),
    },
    "prox-check": {
        "seed": Field("int", 1234, _nonnegative, "base RNG seed"),
        "n_cases": Field("int", 1000, _positive, "randomized triples"),
        "grid_points": Field("int", 10_000, _positive, "probe grid size"),
        "grid_span": Field("float", 10.0, _positive, "probe grid half-width"),
    },
}

EXPERIMENTS = tuple(SCHEMAS)


def parse_kv_file(path):
    """Read a flat `key = value` file into a string dict."""
    result: dict[str, str] = {}
    text = Path(path).read_text()
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{path}:{lineno}: expected 'key = value', got {raw!r}")
        key, value = line.split("=", 1)
        key = key.strip()
        if key in result:
            raise ConfigError(f"{path}:{lineno}: duplicate key {key!r}")
        result[key] = value.strip()
    return result


def config_from_manifest(path):
    """Extract (experiment, config dict) from a run manifest JSON."""
    data = json.loads(Path(path).read_text())
    if "experiment" not in data or "config" not in data:
        raise ConfigError(f"{path} is not a run manifest")
    return data["experiment"], {k: str(v) for k, v in data["config"].items()}


def _convert(experiment, key, raw, field):
    try:
        if field.kind == "int":
            return int(raw)
        if field.kind == "float":
            return float(raw)
        if field.kind == "floats":
            return [float(v) for v in str(raw).split(",") if v.strip() != ""]
        if field.kind == "str":
            return str(raw)
    except ValueError as exc:
        raise ConfigError(
            f"{experiment}: key {key!r} expects {field.kind}, got {raw!r}"
        ) from exc
    raise ConfigError(f"{experiment}: unsupported field kind {field.kind!r}")


def resolve_config(experiment, file_values=None, overrides=None):
    """Merge schema defaults, file values and overrides into a typed dict.

    Raises ConfigError for unknown experiments, unknown keys, type
    mismatches and out-of-range values.
    """
    if experiment not in SCHEMAS:
        raise ConfigError(
            f"unknown experiment {experiment!r}; choose from {', '.join(EXPERIMENTS)}"
        )
    schema = SCHEMAS[experiment]
    merged: dict[str, object] = {k: f.default for k, f in schema.items()}
    for source in (file_values or {}, overrides or {}):
        for key, raw in source.items():
            if key not in schema:
                raise ConfigError(
                    f"{experiment}: unknown key {key!r}; valid keys: "
                    f"{', '.join(sorted(schema))}"
                )
            merged[key] = _convert(experiment, key, raw, schema[key])
    for key, value in merged.items():
        check = schema[key].check
        if check is not None and not check(value):
            raise ConfigError(f"{experiment}: key {key!r} out of range: {value!r}")
    return merged
