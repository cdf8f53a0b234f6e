"""Shared fixtures for the rsgrove test suite."""

from pathlib import Path
from typing import Callable
import os

import numpy as np
import pytest

from rsgrove.config import Settings
from rsgrove.datagen import format_coordinates
from rsgrove.geometry import Envelope
from rsgrove.ingest_service import WeightedSample


@pytest.fixture(autouse=True)
def clean_env(monkeypatch):
    """Keep GROVE_* variables of the calling shell out of every test."""
    for key in list(os.environ):
        if key.upper().startswith("GROVE_"):
            monkeypatch.delenv(key, raising=False)


@pytest.fixture
def unit_square() -> Envelope:
    return Envelope((0.0, 0.0), (1.0, 1.0))


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(20240601)


@pytest.fixture
def collinear_sample() -> WeightedSample:
    """28 equal-weight points on a line, one unit apart."""
    return WeightedSample.from_points(np.arange(28, dtype=np.float64).reshape(-1, 1))


@pytest.fixture
def write_rows(tmp_path) -> Callable[[str, np.ndarray], Path]:
    """Write an (n, k) coordinate array as comma-separated lines."""

    def write(name: str, rows: np.ndarray) -> Path:
        path = tmp_path / name
        with open(path, "w", encoding="utf-8", newline="\n") as handle:
            for row in rows:
                handle.write(format_coordinates(row) + "\n")
        return path

    return write


@pytest.fixture
def make_settings() -> Callable[..., Settings]:
    def make(**values) -> Settings:
        return Settings(**values)

    return make
