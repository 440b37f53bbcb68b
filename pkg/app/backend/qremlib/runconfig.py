"""Run configuration: flat KEY=VALUE files, command-line overrides and validation."""

import logging
from pathlib import Path
from typing import Any, Optional

from dotenv import dotenv_values
from pydantic import BaseModel, Field, ValidationError, field_validator, model_validator

from config import (
    CONFIG_BASE_SEED,
    CONFIG_BETA_GRID,
    CONFIG_EPSILON,
    CONFIG_FORMAT,
    CONFIG_GAMMA_GRID,
    CONFIG_INCLUDE_REM,
    CONFIG_KRYLOV_DIM,
    CONFIG_L,
    CONFIG_MAX_COST,
    CONFIG_METHOD,
    CONFIG_N_LIST,
    CONFIG_NUM_DISORDER,
    CONFIG_OUTPUT,
    CONFIG_P_LIST,
    CONFIG_PROBES,
    CONFIG_R,
    CONFIG_TIMING,
    CONFIG_VARIANT,
    CONFIG_WORKERS,
    DEFAULT_MAX_COST,
)

from .disorder import MAX_DISORDER_SPINS, MIN_DISORDER_SPINS, DisorderKind, DisorderVariant
from .errors import ConfigError, InvalidParameterError
from .lanczos import MAX_KRYLOV_DIM, MIN_KRYLOV_DIM, MIN_PROBES
from .records import OutputFormat

logger = logging.getLogger("qremlab")

KNOWN_KEYS = (
    CONFIG_VARIANT,
    CONFIG_P_LIST,
    CONFIG_N_LIST,
    CONFIG_BETA_GRID,
    CONFIG_GAMMA_GRID,
    CONFIG_EPSILON,
    CONFIG_R,
    CONFIG_L,
    CONFIG_NUM_DISORDER,
    CONFIG_PROBES,
    CONFIG_KRYLOV_DIM,
    CONFIG_BASE_SEED,
    CONFIG_METHOD,
    CONFIG_OUTPUT,
    CONFIG_FORMAT,
    CONFIG_WORKERS,
    CONFIG_MAX_COST,
    CONFIG_TIMING,
    CONFIG_INCLUDE_REM,
)
METHODS = ("auto", "classical_exact", "dense_eig", "stochastic_lanczos")


class RunConfig(BaseModel):
    """
    Everything an experiment needs. Seeds and grids fully determine the output rows.

    List-valued fields accept comma-separated strings, as they arrive from config files.
    """

    variant: str = "strict"
    p_list: list[int] = Field(default_factory=lambda: [3])
    n_list: list[int] = Field(default_factory=lambda: [10])
    beta_grid: list[float] = Field(default_factory=lambda: [1.0])
    gamma_grid: list[float] = Field(default_factory=lambda: [0.0])
    epsilon: Optional[float] = Field(default=None, gt=0.0)
    r: Optional[float] = Field(default=None, gt=0.0, lt=1.0)
    L: Optional[int] = Field(default=None, ge=2)
    num_disorder: int = Field(default=20, ge=2)
    probes: int = Field(default=32, ge=MIN_PROBES)
    krylov_dim: int = Field(default=60, ge=MIN_KRYLOV_DIM, le=MAX_KRYLOV_DIM)
    base_seed: int = Field(default=0, ge=0, lt=2**64)
    method: str = "auto"
    output: Optional[str] = None
    output_format: OutputFormat = OutputFormat.CSV
    workers: int = Field(default=1, ge=1)
    max_cost: float = Field(default=DEFAULT_MAX_COST, gt=0.0)
    timing: bool = False
    include_rem: bool = False

    @field_validator("p_list", "n_list", "beta_grid", "gamma_grid", mode="before")
    @classmethod
    def split_list(cls, value: Any) -> Any:
        if isinstance(value, str):
            return [item.strip() for item in value.split(",") if item.strip()]
        if isinstance(value, (int, float)):
            return [value]
        return value

    @field_validator("p_list", "n_list", "beta_grid", "gamma_grid")
    @classmethod
    def nonempty(cls, value: list) -> list:
        if not value:
            raise ValueError("grid must not be empty")
        return value

    @field_validator("p_list")
    @classmethod
    def interaction_orders(cls, value: list[int]) -> list[int]:
        if any(p < 2 for p in value):
            raise ValueError(f"interaction orders must be >= 2, got {value}")
        return value

    @field_validator("n_list")
    @classmethod
    def spin_counts(cls, value: list[int]) -> list[int]:
        if any(not MIN_DISORDER_SPINS <= n <= MAX_DISORDER_SPINS for n in value):
            raise ValueError(f"spin counts must lie in [{MIN_DISORDER_SPINS}, {MAX_DISORDER_SPINS}], got {value}")
        return value

    @field_validator("beta_grid")
    @classmethod
    def positive_betas(cls, value: list[float]) -> list[float]:
        if any(beta <= 0 for beta in value):
            raise ValueError(f"inverse temperatures must be positive, got {value}")
        return value

    @field_validator("gamma_grid")
    @classmethod
    def nonnegative_fields(cls, value: list[float]) -> list[float]:
        if any(gamma < 0 for gamma in value):
            raise ValueError(f"transverse fields must be non-negative, got {value}")
        return value

    @field_validator("method")
    @classmethod
    def known_method(cls, value: str) -> str:
        if value not in METHODS:
            raise ValueError(f"method must be one of {', '.join(METHODS)}, got '{value}'")
        return value

    @model_validator(mode="after")
    def known_variant(self) -> "RunConfig":
        try:
            for variant in self.variants():
                for n in self.n_list:
                    variant.check_size(n)
        except ValueError as exc:
            raise ValueError(str(exc)) from exc
        return self

    @property
    def kind(self) -> DisorderKind:
        name = self.variant.strip().lower().partition(":")[0]
        try:
            return DisorderKind(name)
        except ValueError as exc:
            raise InvalidParameterError(f"unknown disorder variant '{self.variant}'") from exc

    def variants(self) -> list[DisorderVariant]:
        """One variant per interaction order; the REM ignores the p list."""
        if self.kind == DisorderKind.REM:
            return [DisorderVariant.rem()]
        if ":" in self.variant:
            return [DisorderVariant.parse(self.variant)]
        return [DisorderVariant(self.kind, p) for p in self.p_list]


def _normalize_key(key: str) -> str:
    lowered = key.strip().lower().replace("-", "_")
    if lowered == "l":
        return CONFIG_L
    if lowered == "format":
        return CONFIG_FORMAT
    for known in KNOWN_KEYS:
        if known.lower() == lowered:
            return known
    raise ConfigError(f"unknown configuration key '{key}'")


def load_config_file(path: Path | str) -> dict[str, str]:
    """Read a flat KEY=VALUE file (comments and quoting as in .env files)."""
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"configuration file not found: {path}")
    values = {}
    for key, value in dotenv_values(path).items():
        if value is None or value == "":
            continue
        values[_normalize_key(key)] = value
    logger.debug("Loaded %d configuration values from %s", len(values), path)
    return values


def build_run_config(file_values: Optional[dict[str, Any]] = None, overrides: Optional[dict[str, Any]] = None) -> RunConfig:
    """Merge file values with overrides (overrides win, None means unset) and validate."""
    merged: dict[str, Any] = {}
    for source in (file_values or {}, overrides or {}):
        for key, value in source.items():
            if value is not None:
                merged[_normalize_key(key)] = value
    if CONFIG_FORMAT in merged:
        merged["output_format"] = merged.pop(CONFIG_FORMAT)
    try:
        return RunConfig(**merged)
    except (ValidationError, InvalidParameterError) as exc:
        raise ConfigError(f"invalid configuration: {exc}") from exc
