"""Experiment configuration: JSON files validated with pydantic.

Precedence, highest first: command-line flags, the JSON file, field defaults.
"""

from __future__ import annotations

import enum
import json
from pathlib import Path
from typing import Any, Literal

from pydantic import BaseModel, ConfigDict, Field, PrivateAttr, ValidationError, field_validator, model_validator

from .kernel import Kernel, kernel_from_config
from .levy import LevyDriver, driver_from_config
from .renewal import RenewalScheme, scheme_from_config

__all__ = ["Experiment", "ExperimentConfig", "ConfigError", "load_config"]


class ConfigError(ValueError):
    pass


class Experiment(str, enum.Enum):
    CLT_MEAN = "clt_mean"
    CLT_ACF = "clt_acf"
    ESTIMATOR_STUDY = "estimator_study"
    EFFICIENCY_TABLE = "efficiency_table"
    EFFICIENCY_CURVES = "efficiency_curves"
    PATH_DUMP = "path_dump"


class AGrid(BaseModel):
    """Log-spaced grid of mean-reversion rates for efficiency curves."""

    model_config = ConfigDict(extra="forbid")

    min: float = Field(1e-3, gt=0)
    max: float = Field(10.0, gt=0)
    points: int = Field(200, ge=2)

    @model_validator(mode="after")
    def _ordered(self):
        if self.max <= self.min:
            raise ValueError("a_grid.max must exceed a_grid.min")
        return self


class ExperimentConfig(BaseModel):
    model_config = ConfigDict(extra="forbid")

    experiment: Experiment
    driver: dict[str, Any] = Field(default_factory=lambda: {"type": "brownian"})
    scheme: dict[str, Any] = Field(default_factory=lambda: {"type": "exponential", "lambda": 1.0})
    kernel: dict[str, Any] = Field(default_factory=lambda: {"type": "ou", "a": 1.0})
    n: int = Field(2000, ge=10)
    replications: int = Field(500, ge=1)
    h_max: int = Field(1, ge=0)
    seed: int = Field(0, ge=0, lt=2**64)
    output_dir: str = "out"
    threads: int = Field(1, ge=1)

    # path simulation
    simulation: Literal["auto", "exact_ou", "grid"] = "auto"
    grid_step: float | None = Field(None, gt=0)
    truncation_m: float | None = Field(None, gt=0)

    # asymptotic predictions
    mc_samples: int = Field(20_000, ge=2)
    tail_K: int | None = Field(None, ge=1)

    # efficiency table and curves
    lambdas: list[float] = Field(default_factory=lambda: [0.05, 0.5, 1.0, 2.0])
    etas: list[float] = Field(default_factory=lambda: [3.0, 4.0, 5.0])
    deltas: list[float] = Field(default_factory=lambda: [20.0, 2.0, 1.0, 0.5])
    a_grid: AGrid = Field(default_factory=AGrid)
    a_max: float = Field(100.0, gt=0)

    _base_dir: Path | None = PrivateAttr(default=None)

    @field_validator("lambdas", "deltas")
    @classmethod
    def _positive(cls, v: list[float]) -> list[float]:
        if not v or any(not x > 0 for x in v):
            raise ValueError("must be a non-empty list of positive numbers")
        return v

    @field_validator("etas")
    @classmethod
    def _kurtosis(cls, v: list[float]) -> list[float]:
        if not v or any(x < 1 for x in v):
            raise ValueError("must be a non-empty list of values >= 1")
        return v

    @model_validator(mode="after")
    def _models_build(self):
        # surface bad sub-configs at load time rather than mid-run
        driver_from_config(self.driver)
        scheme_from_config(self.scheme)
        if self.kernel.get("type") != "tabulated" or "s" in self.kernel:
            kernel_from_config(self.kernel)
        if self.experiment is Experiment.CLT_ACF and self.h_max < 1:
            raise ValueError("clt_acf needs h_max >= 1")
        if self.experiment is Experiment.ESTIMATOR_STUDY and self.kernel.get("type") != "ou":
            raise ValueError("estimator_study needs an OU kernel")
        return self

    def build_driver(self) -> LevyDriver:
        return driver_from_config(self.driver)

    def build_scheme(self) -> RenewalScheme:
        return scheme_from_config(self.scheme)

    def build_kernel(self) -> Kernel:
        return kernel_from_config(self.kernel, base_dir=self._base_dir)

    def resolved(self) -> dict[str, Any]:
        """Plain JSON-ready dict of every field, defaults included."""
        return self.model_dump(mode="json")

    @classmethod
    def from_dict(cls, data: dict[str, Any], base_dir: str | Path | None = None) -> "ExperimentConfig":
        try:
            cfg = cls.model_validate(data)
        except ValidationError as exc:
            raise ConfigError(str(exc)) from None
        except ValueError as exc:
            raise ConfigError(str(exc)) from None
        cfg._base_dir = Path(base_dir) if base_dir is not None else None
        if cfg.kernel.get("type") == "tabulated" and "s" not in cfg.kernel:
            try:
                cfg.build_kernel()
            except (OSError, ValueError) as exc:
                raise ConfigError(f"tabulated kernel: {exc}") from None
        return cfg


def load_config(path: str | Path | None, overrides: dict[str, Any] | None = None) -> ExperimentConfig:
    """Read a JSON config (or start from defaults when ``path`` is None) and apply overrides."""
    data: dict[str, Any] = {}
    base_dir = None
    if path is not None:
        path = Path(path)
        try:
            data = json.loads(path.read_text())
        except OSError as exc:
            raise ConfigError(f"cannot read config {path}: {exc.strerror}") from None
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path}: invalid JSON: {exc}") from None
        if not isinstance(data, dict):
            raise ConfigError(f"{path}: top level must be a JSON object")
        base_dir = path.parent
    data.update({k: v for k, v in (overrides or {}).items() if v is not None})
    return ExperimentConfig.from_dict(data, base_dir)
