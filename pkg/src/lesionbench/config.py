"""Configuration for lesionbench commands.

Settings come from, in increasing precedence: built-in defaults, the
``LESIONBENCH_JOBS`` environment variable, a YAML file passed with ``--config``,
and explicit command-line flags. Invalid values never abort loading; they fall
back to the default (or keep the current value on update) and are collected as
warnings.
"""

from __future__ import annotations

import logging
import math
import os
from collections.abc import Callable, Mapping
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Any

import yaml

from lesionbench.ensemble import DEFAULT_DISAGREEMENT_CAP, PrecisionMode
from lesionbench.errors import ParameterError
from lesionbench.evaluation import DEFAULT_AGE_EDGES, DEFAULT_TSI_EDGES, AggregationPolicy
from lesionbench.metrics import DEFAULT_TOLERANCE_MM
from lesionbench.preprocess import DEFAULT_TARGET_MM, Interpolation
from lesionbench.schedules import DEFAULT_POLY_EXPONENT

logger = logging.getLogger(__name__)

JOBS_ENV_VAR = "LESIONBENCH_JOBS"
ELLIPSIS = "..."


def parse_bin_edges(text: str | list[Any] | tuple[Any, ...]) -> tuple[float, ...]:
    """
    Parse bin edges such as ``"0,10,20,...,80"`` or ``"0,6,12,24,60,inf"``.

    An ellipsis continues the arithmetic progression set by the two edges
    before it up to the edge after it, which must be reached exactly.

    Raises:
        ParameterError: On unparsable or non-increasing edges
    """
    items = [s.strip() for s in text.split(",")] if isinstance(text, str) else list(text)
    edges: list[float] = []
    index = 0
    while index < len(items):
        item = items[index]
        if item == ELLIPSIS:
            if len(edges) < 2 or index + 1 >= len(items):
                raise ParameterError("'...' needs two edges before it and one after it")
            step = edges[-1] - edges[-2]
            end = _edge(items[index + 1])
            if step <= 0 or not math.isfinite(end):
                raise ParameterError(f"cannot expand '...' from step {step} to {end}")
            steps = (end - edges[-1]) / step
            if steps < 1 or not math.isclose(steps, round(steps), abs_tol=1e-9):
                raise ParameterError(f"'...' progression with step {step:g} does not reach {end:g}")
            base = edges[-1]
            edges.extend(base + step * n for n in range(1, round(steps)))
            index += 1
            continue
        edges.append(_edge(item))
        index += 1
    if len(edges) < 2:
        raise ParameterError(f"need at least two bin edges, got {edges}")
    if any(b <= a for a, b in zip(edges, edges[1:])):
        raise ParameterError(f"bin edges must be strictly increasing: {edges}")
    return tuple(edges)


def _edge(item: Any) -> float:
    try:
        value = float(item)
    except (TypeError, ValueError):
        raise ParameterError(f"bin edge {item!r} is not a number") from None
    if math.isnan(value):
        raise ParameterError("bin edges cannot be NaN")
    return value


def _positive_float(value: Any) -> float | None:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        return None
    return float(value) if math.isfinite(value) and value > 0 else None


def _non_negative_int(value: Any) -> int | None:
    if isinstance(value, bool) or not isinstance(value, int):
        return None
    return value if value >= 0 else None


def _positive_int(value: Any) -> int | None:
    result = _non_negative_int(value)
    return result if result else None


def _read_yaml(path: str | Path) -> dict[str, Any]:
    try:
        data = yaml.safe_load(Path(path).read_text(encoding="utf-8"))
    except OSError as e:
        raise ParameterError(f"cannot read config {path}: {e}") from e
    except yaml.YAMLError as e:
        raise ParameterError(f"{path} is not valid YAML: {e}") from e
    if data is None:
        return {}
    if not isinstance(data, dict):
        raise ParameterError(f"{path} must contain a mapping of settings")
    return data


@dataclass
class ToolkitConfig:
    """Settings shared by the lesionbench commands.

    Example:
        >>> config = ToolkitConfig.from_dict({"tolerance_mm": 2.0, "policy": "ignore_nan"})
        >>> config.policy
        <AggregationPolicy.IGNORE_NAN: 'ignore_nan'>
    """

    # Surface distance tolerance for NSD
    tolerance_mm: float = DEFAULT_TOLERANCE_MM

    # Policy of the headline summary row
    policy: AggregationPolicy = AggregationPolicy.NAN_AS_ONE

    # Ensemble accumulation precision
    precision: PrecisionMode = PrecisionMode.SINGLE

    target_mm: float = DEFAULT_TARGET_MM
    interpolation: Interpolation = Interpolation.TRILINEAR

    # Worker processes for per-case commands
    jobs: int = 1

    seed: int = 0
    age_bins: tuple[float, ...] = DEFAULT_AGE_EDGES
    tsi_bins: tuple[float, ...] = DEFAULT_TSI_EDGES
    poly_exponent: float = DEFAULT_POLY_EXPONENT
    disagreement_cap: int = DEFAULT_DISAGREEMENT_CAP

    _warnings: list[str] = field(default_factory=list, init=False, repr=False)

    def _warn(self, key: str, value: Any, expected: str, use_default: bool) -> None:
        current = getattr(type(self)(), key) if use_default else getattr(self, key)
        if isinstance(current, Enum):
            current = current.value
        action = "Using default" if use_default else "Keeping current"
        self._warnings.append(f"Invalid {key} {value!r}. {expected}. {action}: {current!r}")
        logger.warning(self._warnings[-1])

    def _set_enum(self, key: str, enum_type: type[Enum], value: Any, use_default: bool) -> None:
        parse: Callable[[Any], Enum] = getattr(enum_type, "parse")
        try:
            setattr(self, key, parse(value))
        except ValueError:
            choices = [m.value for m in enum_type]
            self._warn(key, value, f"Valid values are: {choices}", use_default)

    def _set_checked(
        self,
        key: str,
        value: Any,
        check: Callable[[Any], Any],
        expected: str,
        use_default: bool,
    ) -> None:
        checked = check(value)
        if checked is None:
            self._warn(key, value, expected, use_default)
        else:
            setattr(self, key, checked)

    def _set_bins(self, key: str, value: Any, use_default: bool) -> None:
        try:
            setattr(self, key, parse_bin_edges(value))
        except (ParameterError, TypeError) as e:
            self._warn(key, value, str(e), use_default)

    def _apply(self, config_dict: Mapping[str, Any], use_default: bool) -> None:
        known = {
            "tolerance_mm",
            "policy",
            "precision",
            "target_mm",
            "interpolation",
            "jobs",
            "seed",
            "age_bins",
            "tsi_bins",
            "poly_exponent",
            "disagreement_cap",
        }
        for key in sorted(set(config_dict) - known):
            self._warnings.append(f"Unknown setting '{key}' ignored")
            logger.warning(self._warnings[-1])

        for key in ("tolerance_mm", "target_mm", "poly_exponent"):
            if key in config_dict:
                self._set_checked(
                    key, config_dict[key], _positive_float, "Must be a positive number", use_default
                )
        enums = {"policy": AggregationPolicy, "precision": PrecisionMode, "interpolation": Interpolation}
        for key, enum_type in enums.items():
            if key in config_dict:
                self._set_enum(key, enum_type, config_dict[key], use_default)
        if "jobs" in config_dict:
            self._set_checked(
                "jobs", config_dict["jobs"], _positive_int, "Must be a positive integer", use_default
            )
        for key in ("seed", "disagreement_cap"):
            if key in config_dict:
                self._set_checked(
                    key, config_dict[key], _non_negative_int, "Must be a non-negative integer", use_default
                )
        for key in ("age_bins", "tsi_bins"):
            if key in config_dict:
                self._set_bins(key, config_dict[key], use_default)

    @classmethod
    def from_dict(cls, config_dict: Mapping[str, Any]) -> ToolkitConfig:
        """
        Create configuration from a dictionary.

        Invalid values fall back to defaults and are reported by get_warnings().
        """
        instance = cls()
        instance._apply(config_dict, use_default=True)
        return instance

    @classmethod
    def from_yaml(cls, path: str | Path) -> ToolkitConfig:
        """
        Load configuration from a YAML mapping.

        Raises:
            ParameterError: If the file is not valid YAML or not a mapping
        """
        return cls.from_dict(_read_yaml(path))

    @classmethod
    def load(
        cls, path: str | Path | None = None, environ: Mapping[str, str] | None = None
    ) -> ToolkitConfig:
        """Defaults, overridden by the environment, overridden by the YAML file."""
        environ = os.environ if environ is None else environ
        instance = cls()
        env_jobs = environ.get(JOBS_ENV_VAR, "").strip()
        if env_jobs:
            jobs: Any = int(env_jobs) if env_jobs.lstrip("-").isdigit() else env_jobs
            instance._apply({"jobs": jobs}, use_default=True)
        if path is not None:
            instance._apply(_read_yaml(path), use_default=False)
        return instance

    def get_warnings(self) -> list[str]:
        """Validation warnings collected so far."""
        return self._warnings.copy()

    def has_warnings(self) -> bool:
        return len(self._warnings) > 0

    def update_from_dict(self, config_dict: Mapping[str, Any]) -> list[str]:
        """
        Update only the keys present in ``config_dict``.

        Invalid values keep the current setting.

        Returns:
            Warnings raised by this update
        """
        self._warnings = []
        self._apply(config_dict, use_default=False)
        return self.get_warnings()

    def to_dict(self) -> dict[str, Any]:
        """Plain-data form accepted by from_dict."""
        return {
            "tolerance_mm": self.tolerance_mm,
            "policy": self.policy.value,
            "precision": self.precision.value,
            "target_mm": self.target_mm,
            "interpolation": self.interpolation.value,
            "jobs": self.jobs,
            "seed": self.seed,
            "age_bins": list(self.age_bins),
            "tsi_bins": [str(e) if math.isinf(e) else e for e in self.tsi_bins],
            "poly_exponent": self.poly_exponent,
            "disagreement_cap": self.disagreement_cap,
        }
