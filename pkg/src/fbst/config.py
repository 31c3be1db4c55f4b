"""Experiment configuration: defaults, flat key=value files, overrides.

Every key in DEFAULTS is a documented config-file key and has a
matching CLI flag; precedence is flag > file > default.  The config
hash covers the resolved values so reruns can be matched to outputs.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, field, fields

# (default, parser) per key; parser turns the string form into the value
_BOOL = {"true": True, "false": False, "1": True, "0": False, "yes": True, "no": False}


def _parse_bool(text: str) -> bool:
    try:
        return _BOOL[text.strip().lower()]
    except KeyError:
        raise ValueError(f"expected a boolean, got {text!r}") from None


def _parse_int_list(text: str) -> tuple[int, ...]:
    return tuple(int(tok) for tok in text.split(",") if tok.strip())


def _parse_float_list(text: str) -> tuple[float, ...]:
    return tuple(float(tok) for tok in text.split(",") if tok.strip())


def _parse_str_list(text: str) -> tuple[str, ...]:
    return tuple(tok.strip() for tok in text.split(",") if tok.strip())


@dataclass
class ExperimentConfig:
    """Resolved settings for one pipeline run."""

    # data source: a preset name or a csv path plus target column
    preset: str = "toy"  # toy | dataset1 | dataset2 | dataset3
    csv: str = ""
    target: str = ""
    n: int = 0  # 0 keeps the preset's default sample count
    d: int = 0
    significant_count: int = 0
    noise_sigma: float = 0.0
    teacher_widths: tuple[int, ...] = ()

    # trained model architecture
    hidden: tuple[int, ...] = (20, 20, 20)
    activation: str = "relu"

    # variational training
    epochs: int = 200
    batch_size: int = 128
    learning_rate: float = 1e-2
    mc_samples: int = 1
    kl_scale: float = 0.0  # 0 means once per epoch (1/num_batches)
    observation_sigma: float = 1.0
    prior_mean: float = 0.0
    prior_sigma: float = 1.0

    # testing
    draws: int = 1000
    stats: tuple[str, ...] = ("grad",)
    lambdas: tuple[float, ...] = (0.5,)
    eps: tuple[float, ...] = (1e-3, 1e-2, 5e-2)
    qgs_threshold: float = 0.5
    alpha: float = 0.05
    lrp_epsilon: float = 1e-6
    deeplift_reference: str = "mean"  # mean | zeros
    lime_perturbations: int = 500
    lime_scale: float = 0.3
    lime_kernel_width: float = 0.0  # 0 means 0.75 * sqrt(d)
    lime_ridge: float = 1e-3

    # baselines
    baselines: tuple[str, ...] = ()
    bootstrap_resamples: int = 50
    point_epochs: int = 30
    point_batch_size: int = 64
    point_learning_rate: float = 1e-2

    # execution
    workers: int = 1
    feature_block: int = 0  # 0 sizes blocks automatically from memory
    histogram_features: tuple[str, ...] = ()  # empty emits every feature
    seed: int = 0
    out: str = "fbst-out"


_PARSERS = {
    "preset": str,
    "csv": str,
    "target": str,
    "n": int,
    "d": int,
    "significant_count": int,
    "noise_sigma": float,
    "teacher_widths": _parse_int_list,
    "hidden": _parse_int_list,
    "activation": str,
    "epochs": int,
    "batch_size": int,
    "learning_rate": float,
    "mc_samples": int,
    "kl_scale": float,
    "observation_sigma": float,
    "prior_mean": float,
    "prior_sigma": float,
    "draws": int,
    "stats": _parse_str_list,
    "lambdas": _parse_float_list,
    "eps": _parse_float_list,
    "qgs_threshold": float,
    "alpha": float,
    "lrp_epsilon": float,
    "deeplift_reference": str,
    "lime_perturbations": int,
    "lime_scale": float,
    "lime_kernel_width": float,
    "lime_ridge": float,
    "baselines": _parse_str_list,
    "bootstrap_resamples": int,
    "point_epochs": int,
    "point_batch_size": int,
    "point_learning_rate": float,
    "workers": int,
    "feature_block": int,
    "histogram_features": _parse_str_list,
    "seed": int,
    "out": str,
}

VALID_PRESETS = ("toy", "dataset1", "dataset2", "dataset3")
VALID_STATS = ("grad", "lrp", "deeplift", "lime")
VALID_BASELINES = ("ttest", "bootstrap", "lrt")


class UsageError(ValueError):
    """Bad flags, config keys or values; exits with code 1 from the CLI."""


def parse_config_file(path) -> dict:
    """Flat ``key = value`` lines; '#' starts a comment; blank lines skipped."""
    values = {}
    with open(path, "r", encoding="utf-8") as fh:
        for line_no, raw in enumerate(fh, start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise UsageError(f"{path}:{line_no}: expected 'key = value', got {raw!r}")
            key, _, text = line.partition("=")
            key = key.strip()
            if key not in _PARSERS:
                raise UsageError(f"{path}:{line_no}: unknown config key {key!r}")
            try:
                values[key] = _PARSERS[key](text.strip())
            except ValueError as exc:
                raise UsageError(f"{path}:{line_no}: bad value for {key}: {exc}") from exc
    return values


def resolve_config(
    file_values: dict | None = None, flag_values: dict | None = None
) -> ExperimentConfig:
    """Merge defaults, config-file values and CLI flag values, then check."""
    merged = {}
    merged.update(file_values or {})
    merged.update({k: v for k, v in (flag_values or {}).items() if v is not None})
    unknown = set(merged) - set(_PARSERS)
    if unknown:
        raise UsageError(f"unknown config keys: {sorted(unknown)}")
    config = ExperimentConfig(**merged)
    validate_config(config)
    return config


def validate_config(config: ExperimentConfig) -> None:
    if not config.csv and config.preset not in VALID_PRESETS:
        raise UsageError(
            f"preset {config.preset!r} unknown; expected one of {VALID_PRESETS}"
        )
    if config.csv and not config.target:
        raise UsageError("csv data needs a target column (key 'target')")
    for stat in config.stats:
        if stat not in VALID_STATS:
            raise UsageError(f"unknown statistic {stat!r}; expected {VALID_STATS}")
    for baseline in config.baselines:
        if baseline not in VALID_BASELINES:
            raise UsageError(
                f"unknown baseline {baseline!r}; expected {VALID_BASELINES}"
            )
    for lam in config.lambdas:
        if not 0.0 < lam <= 1.0:
            raise UsageError(f"lambda {lam} outside (0, 1]")
    for eps in config.eps:
        if eps <= 0:
            raise UsageError(f"eps {eps} must be positive")
    if config.draws < 2:
        raise UsageError("draws must be at least 2")
    if config.deeplift_reference not in ("mean", "zeros"):
        raise UsageError("deeplift_reference must be 'mean' or 'zeros'")
    if config.workers < 1:
        raise UsageError("workers must be at least 1")


def config_to_dict(config: ExperimentConfig) -> dict:
    out = {}
    for f in fields(config):
        value = getattr(config, f.name)
        out[f.name] = list(value) if isinstance(value, tuple) else value
    return out


def config_hash(config: ExperimentConfig) -> str:
    canonical = "\n".join(
        f"{key}={config_to_dict(config)[key]!r}" for key in sorted(_PARSERS)
    )
    return hashlib.sha256(canonical.encode("utf-8")).hexdigest()[:16]
