"""Experiment configuration files.

A config file holds one ``key = value`` pair per line. ``#`` starts a comment,
blank lines are ignored and keys are case-insensitive. Lists are
comma-separated; a schedule is a list of ``epoch:rho`` pairs; lambda is a
float or ``c/n`` resolved against the training-set size.
"""

import logging
import os
from dataclasses import dataclass, fields, replace
from pathlib import Path
from typing import Any, Callable

from . import constants as C
from .optimizers import BASELINE_KINDS, OASIS_KINDS, Hyperparameters, ScheduleSpec

logger = logging.getLogger(__name__)

LOSS_KINDS = ("logistic", "nls")


class ConfigError(ValueError):
    """Unknown key, unparsable value or out-of-range setting."""


@dataclass(frozen=True)
class ExperimentConfig:
    """Everything needed to reproduce an experiment."""

    name: str = "experiment"

    # Problem
    dataset: str | None = None  # LIBSVM path; None selects synthetic data
    test_dataset: str | None = None  # Explicit test file instead of a split
    loss: str = "logistic"
    lam: str = "1/n"  # Float or "c/n"
    half_scale: bool = False  # NLS with 1/(2n) normalization
    test_fraction: float = C.DEFAULT_TEST_FRACTION
    n_samples: int = 200  # Synthetic data
    n_features: int = 10
    sparsity: float = 1.0  # Fraction of entries kept
    separation: float = 1.0
    data_seed: int = 0

    # Optimizer
    optimizer: str = "oasis"
    lr: float | None = None  # None selects the optimizer's default
    beta1: float = C.DEFAULT_BETA1
    beta2: float = C.DEFAULT_BETA2
    alpha: float = C.DEFAULT_ALPHA
    gamma: float = C.DEFAULT_GAMMA
    optimistic: bool = False
    epsilon: float = C.DEFAULT_EPSILON
    weight_decay: float = 0.0
    warmstart: int = C.DEFAULT_WARMSTART
    batch_size: int = 0  # 0 means full batch
    schedule: tuple[tuple[int, float], ...] = ()

    # Run controls
    max_passes: float = C.DEFAULT_MAX_PASSES
    grad_tol: float = 0.0  # Stop once ||grad F||^2 falls to this value
    seeds: tuple[int, ...] = (0,)
    lr_grid: tuple[float, ...] = C.DEFAULT_LR_GRID
    sweep_optimizer: str = "adahessian"

    @property
    def is_stochastic(self) -> bool:
        return self.batch_size > 0

    def learning_rate(self) -> float:
        return self.lr if self.lr is not None else C.DEFAULT_LR[self.optimizer]

    def lambda_for(self, n: int) -> float:
        """Resolve ``lam`` against the training-set size n."""
        return parse_lambda(self.lam, n)

    def hyperparameters(self, lr: float | None = None) -> Hyperparameters:
        return Hyperparameters(
            lr=self.learning_rate() if lr is None else lr,
            beta1=self.beta1,
            beta2=self.beta2,
            alpha=self.alpha,
            gamma=self.gamma,
            optimistic=self.optimistic,
            epsilon=self.epsilon,
            weight_decay=self.weight_decay,
            warmstart=self.warmstart,
        )

    def schedule_spec(self) -> ScheduleSpec:
        return ScheduleSpec(self.schedule)


def parse_lambda(text: str, n: int) -> float:
    """Parse ``0.1``, ``1/n`` or ``10/n`` style regularization strengths."""
    text = text.strip().replace(" ", "")
    if text.endswith("/n"):
        coeff = text[:-2]
        return float(coeff) / n
    return float(text)


def _parse_bool(text: str) -> bool:
    lowered = text.lower()
    if lowered in ("true", "yes", "on", "1"):
        return True
    if lowered in ("false", "no", "off", "0"):
        return False
    raise ValueError(f"expected a boolean, got '{text}'")


def _parse_optional_str(text: str) -> str | None:
    return None if text.lower() in ("", "none", "synthetic") else text


def _parse_list(convert: Callable[[str], Any]) -> Callable[[str], tuple]:
    def parse(text: str) -> tuple:
        return tuple(convert(item.strip()) for item in text.split(",") if item.strip())

    return parse


def _parse_milestone(text: str) -> tuple[int, float]:
    epoch, sep, rho = text.partition(":")
    if not sep:
        raise ValueError(f"schedule entries look like epoch:rho, got '{text}'")
    return int(epoch), float(rho)


def _parse_lambda_text(text: str) -> str:
    parse_lambda(text, 1)
    return text


_PARSERS: dict[str, Callable[[str], Any]] = {
    "name": str,
    "dataset": _parse_optional_str,
    "test_dataset": _parse_optional_str,
    "loss": str.lower,
    "lam": _parse_lambda_text,
    "half_scale": _parse_bool,
    "test_fraction": float,
    "n_samples": int,
    "n_features": int,
    "sparsity": float,
    "separation": float,
    "data_seed": int,
    "optimizer": str.lower,
    "lr": float,
    "beta1": float,
    "beta2": float,
    "alpha": float,
    "gamma": float,
    "optimistic": _parse_bool,
    "epsilon": float,
    "weight_decay": float,
    "warmstart": int,
    "batch_size": int,
    "schedule": _parse_list(_parse_milestone),
    "max_passes": float,
    "grad_tol": float,
    "seeds": _parse_list(int),
    "lr_grid": _parse_list(float),
    "sweep_optimizer": str.lower,
}

_ALIASES = {"lambda": "lam", "eta": "lr", "eta0": "lr", "seed": "seeds"}


def parse_config(text: str) -> ExperimentConfig:
    """Parse config text into a validated ExperimentConfig.

    Raises:
        ConfigError: On unknown keys, malformed lines or invalid values
    """
    values: dict[str, Any] = {}
    for line_number, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, value = line.partition("=")
        if not sep:
            raise ConfigError(f"line {line_number}: expected 'key = value', got '{line}'")
        key = key.strip().lower()
        key = _ALIASES.get(key, key)
        if key not in _PARSERS:
            raise ConfigError(f"line {line_number}: unknown key '{key}'")
        try:
            values[key] = _PARSERS[key](value.strip())
        except ValueError as e:
            raise ConfigError(f"line {line_number}: invalid value for '{key}': {e}") from None
    config = ExperimentConfig(**values)
    validate(config)
    return config


def load_config(path: Path) -> ExperimentConfig:
    """Read and parse a config file."""
    config = parse_config(Path(path).read_text(encoding="utf-8"))
    logger.debug("Loaded config %s from %s", config.name, path)
    return config


def apply_overrides(config: ExperimentConfig, **overrides: Any) -> ExperimentConfig:
    """Return a copy with every non-None override applied, then validate it."""
    known = {f.name for f in fields(ExperimentConfig)}
    changes = {}
    for key, value in overrides.items():
        if value is None:
            continue
        if key not in known:
            raise ConfigError(f"unknown setting '{key}'")
        changes[key] = value
    updated = replace(config, **changes)
    validate(updated)
    return updated


def validate(config: ExperimentConfig) -> None:
    """Check every setting is within its valid range.

    Raises:
        ConfigError: Naming the first offending setting
    """
    checks = [
        (config.loss in LOSS_KINDS, f"loss must be one of {', '.join(LOSS_KINDS)}"),
        (
            config.optimizer in OASIS_KINDS + BASELINE_KINDS,
            f"optimizer must be one of {', '.join(OASIS_KINDS + BASELINE_KINDS)}",
        ),
        (config.sweep_optimizer in BASELINE_KINDS + OASIS_KINDS, "sweep_optimizer is unknown"),
        (0.0 <= config.beta2 <= 1.0, "beta2 must lie in [0, 1]"),
        (0.0 <= config.beta1 < 1.0, "beta1 must lie in [0, 1)"),
        (config.alpha > 0.0, "alpha must be positive"),
        (config.gamma > 0.0, "gamma must be positive"),
        (config.lr is None or config.lr > 0.0, "lr must be positive"),
        (config.epsilon >= 0.0, "epsilon must be non-negative"),
        (config.weight_decay >= 0.0, "weight_decay must be non-negative"),
        (config.warmstart >= 0, "warmstart must be non-negative"),
        (config.batch_size >= 0, "batch_size must be non-negative (0 = full batch)"),
        (len(config.seeds) > 0, "seeds must not be empty"),
        (0.0 < config.test_fraction < 1.0, "test_fraction must lie in (0, 1)"),
        (config.max_passes >= 0.0, "max_passes must be non-negative"),
        (config.grad_tol >= 0.0, "grad_tol must be non-negative"),
        (config.n_samples >= 1 and config.n_features >= 1, "synthetic sizes must be positive"),
        (0.0 < config.sparsity <= 1.0, "sparsity must lie in (0, 1]"),
        (all(lr > 0 for lr in config.lr_grid), "lr_grid entries must be positive"),
    ]
    for ok, message in checks:
        if not ok:
            raise ConfigError(message)
    if config.optimizer in ("adam", "adamw", "adahessian") and config.beta2 == 1.0:
        raise ConfigError("beta2 must be below 1 for bias-corrected second moments")
    if config.optimizer == "oasis_linesearch" and config.is_stochastic:
        raise ConfigError("oasis_linesearch runs full batch only (batch_size = 0)")
    if config.optimizer in OASIS_KINDS and not config.is_stochastic and 0.0 < config.max_passes <= config.warmstart:
        raise ConfigError(
            f"warmstart = {config.warmstart} uses the whole max_passes = {config.max_passes:g} "
            "budget before the first step"
        )
    try:
        parse_lambda(config.lam, 1)
    except ValueError:
        raise ConfigError(f"lambda must be a float or c/n, got '{config.lam}'") from None
    if parse_lambda(config.lam, 1) < 0:
        raise ConfigError("lambda must be non-negative")
    try:
        config.schedule_spec()
    except ValueError as e:
        raise ConfigError(str(e)) from None


def thread_count() -> int:
    """Worker count from OASIS_THREADS (default 1, at least 1)."""
    raw = os.environ.get(C.THREADS_ENV_VAR, "1")
    try:
        return max(1, int(raw))
    except ValueError:
        logger.warning("Ignoring %s=%r (not an integer)", C.THREADS_ENV_VAR, raw)
        return 1
