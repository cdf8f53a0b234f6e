"""
Configuration settings for the rsgrove pipeline.
Loads run parameters from defaults, GROVE_* environment variables,
a flat key=value config file and command-line flags.
"""

from pathlib import Path
from typing import Any, Dict, List, Literal, Optional
import logging
import os

import numpy as np
from dotenv import dotenv_values
from pydantic import Field, field_validator
from pydantic_settings import BaseSettings, SettingsConfigDict

logger = logging.getLogger(__name__)

MIB = 1024 * 1024

PARTITIONERS = ("rsgrove", "str", "kdtree", "zcurve", "hcurve")
STRATEGIES = ("blackbox", "graybox", "grove")


class Settings(BaseSettings):
    """
    Run configuration shared by every subcommand.

    Attributes:
        block_size: Block size B in bytes (one partition should fill one block)
        alpha: Balance factor, the required ratio m/M
        rho: Minimum splitting ratio for the top-down split
        sample_ratio: Bernoulli sampling ratio r
        seed: Seed for sampling, generators and query workloads
        partitioner: Which partitioner builds the scheme
        mode: disjoint (replicate straddling records) or overlap (ChooseLeaf)
        strategy: blackbox / graybox / grove variant of the R*-style partitioner
        grid_cells: Histogram cells per dimension (0 derives it from the partition count)
        dims: Dimensionality of the records
        schema: point (d coordinates) or envelope (2d coordinates) records
        delimiter: Field delimiter of the input text
        columns: Coordinate column indices (empty = leading columns)
        threads: Worker threads for query and join batches (0 = machine parallelism)
        log_level: Logging level name
        area_fraction: Range query volume as a fraction of the domain volume
    """

    model_config = SettingsConfigDict(
        env_prefix="GROVE_",
        case_sensitive=False,
        extra="ignore",
    )

    block_size: int = Field(128 * MIB, gt=0)
    alpha: float = Field(0.95, gt=0.0, lt=1.0)
    rho: float = Field(0.4, ge=0.0, le=0.5)
    sample_ratio: float = Field(0.01, gt=0.0, le=1.0)
    seed: int = Field(0, ge=0)
    partitioner: Literal["rsgrove", "str", "kdtree", "zcurve", "hcurve"] = "rsgrove"
    mode: Literal["disjoint", "overlap"] = "disjoint"
    strategy: Literal["blackbox", "graybox", "grove"] = "grove"
    grid_cells: int = Field(0, ge=0)
    dims: int = Field(2, ge=1)
    schema_kind: Literal["point", "envelope"] = "point"
    delimiter: str = ","
    columns: List[int] = Field(default_factory=list)
    threads: int = Field(0, ge=0)
    log_level: str = "INFO"
    area_fraction: float = Field(1e-4, gt=0.0, lt=1.0)

    @field_validator("columns", mode="before")
    @classmethod
    def split_columns(cls, value: Any) -> Any:
        """Accept "0,1" strings from config files and flags."""
        if isinstance(value, str):
            return [int(part) for part in value.split(",") if part.strip()]
        return value

    @field_validator("log_level")
    @classmethod
    def check_log_level(cls, value: str) -> str:
        level = value.upper()
        if not isinstance(logging.getLevelName(level), int):
            raise ValueError(f"unknown log level {value!r}")
        return level

    @property
    def disjoint(self) -> bool:
        return self.mode == "disjoint"

    @property
    def worker_threads(self) -> int:
        return self.threads or os.cpu_count() or 1


def load_settings(
    config_file: Optional[Path] = None,
    overrides: Optional[Dict[str, Any]] = None,
) -> Settings:
    """
    Build settings with flag > config file > environment > default precedence.

    Args:
        config_file: Optional flat key=value file (keys are field names)
        overrides: Values from command-line flags; None entries are ignored

    Returns:
        Settings: Validated run configuration

    Raises:
        pydantic.ValidationError: If any value is out of range
        ValueError: If config_file names a key that is not a setting
        FileNotFoundError: If config_file does not exist
    """
    values: Dict[str, Any] = {}
    if config_file is not None:
        if not Path(config_file).is_file():
            raise FileNotFoundError(f"config file not found: {config_file}")
        file_values = {_field_name(key): val for key, val in dotenv_values(config_file).items()}
        unknown = sorted(set(file_values) - set(Settings.model_fields))
        if unknown:
            raise ValueError(f"{config_file}: unknown keys {unknown}")
        values.update({key: val for key, val in file_values.items() if val is not None})
        logger.debug(f"Loaded {len(file_values)} keys from {config_file}")
    if overrides:
        values.update({_field_name(key): val for key, val in overrides.items() if val is not None})
    return Settings(**values)


def _field_name(key: str) -> str:
    """Map user-facing keys (schema, sample-ratio, ...) to field names."""
    name = key.strip().lower().replace("-", "_")
    return "schema_kind" if name == "schema" else name


# ========== Random streams ==========

DATA_STREAM = 0
SAMPLE_STREAM = 1
QUERY_STREAM = 2


def stream_rng(seed: int, stream: int) -> np.random.Generator:
    """
    Generator for one purpose of a seeded run.

    Data generation, sampling and query workloads each draw from their own
    stream of the seed, so equal seeds never couple them.

    Raises:
        ValueError: If seed is negative
    """
    if seed < 0:
        raise ValueError(f"seed must be >= 0, got {seed}")
    return np.random.default_rng([seed, stream])
