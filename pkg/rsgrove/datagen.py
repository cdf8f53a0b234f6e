"""
Synthetic datasets: uniform points, diagonal points and variable-size
records. Array generators feed the in-memory benchmark; the gen_* wrappers
yield text lines in the ingest format from the same random stream.
"""

from __future__ import annotations

from pathlib import Path
from typing import Iterable, Iterator, Optional, Sequence, Tuple
import logging
import math

import numpy as np

from rsgrove.config import DATA_STREAM, stream_rng

logger = logging.getLogger(__name__)

DEFAULT_SKEW = 0.8


# ========== Arrays ==========

def uniform_points(n: int, d: int, seed: int) -> np.ndarray:
    """(n, d) points uniform in the unit cube."""
    if n < 0 or d < 1:
        raise ValueError(f"need n >= 0 and d >= 1, got {n}, {d}")
    return stream_rng(seed, DATA_STREAM).random((n, d))


def diagonal_points(n: int, d: int, perc: float, buf: float, seed: int) -> np.ndarray:
    """
    (n, d) points along the main diagonal of the unit cube.

    Each point picks t ~ U(0, 1). With probability `perc` it is exactly
    (t, ..., t); otherwise every coordinate gets an independent offset in
    [-buf/2, buf/2], clipped to [0, 1].
    """
    if d < 2:
        raise ValueError(f"diagonal points need d >= 2, got {d}")
    if not 0.0 <= perc <= 1.0:
        raise ValueError(f"perc must be in [0, 1], got {perc}")
    if buf < 0:
        raise ValueError(f"buf must be >= 0, got {buf}")
    rng = stream_rng(seed, DATA_STREAM)
    t = rng.random(n)
    on_line = rng.random(n) < perc
    offsets = rng.uniform(-buf / 2.0, buf / 2.0, size=(n, d))
    points = np.clip(t[:, None] + offsets, 0.0, 1.0)
    points[on_line] = t[on_line, None]
    return points


def log_uniform_lengths(
    n: int,
    min_bytes: int,
    max_bytes: int,
    rng: np.random.Generator,
    driver: Optional[np.ndarray] = None,
    skew: float = 0.0,
) -> np.ndarray:
    """
    Integer lengths, log-uniform in [min_bytes, max_bytes].

    With probability `skew` a length takes its quantile from `driver`
    (values in [0, 1]) instead of a fresh uniform draw, so large records
    cluster where the driver is high. The marginal stays log-uniform when
    the driver is uniform.
    """
    if not 1 <= min_bytes <= max_bytes:
        raise ValueError(f"need 1 <= min_bytes <= max_bytes, got {min_bytes}, {max_bytes}")
    u = rng.random(n)
    if driver is not None and skew > 0:
        follow = rng.random(n) < skew
        u = np.where(follow, np.clip(driver, 0.0, 1.0), u)
    low, high = math.log(min_bytes), math.log(max_bytes)
    lengths = np.floor(np.exp(low + u * (high - low)))
    return np.clip(lengths, min_bytes, max_bytes).astype(np.int64)


def varsize_dataset(
    n: int,
    d: int,
    seed: int,
    min_bytes: int,
    max_bytes: int,
    skew: float = DEFAULT_SKEW,
) -> Tuple[np.ndarray, np.ndarray]:
    """
    Uniform points with log-uniform record sizes tied to the first coordinate.

    Returns:
        (points, sizes); sizes are the payload sizes of the lines gen_varsize
        writes whenever min_bytes exceeds the coordinate text width
    """
    rng = stream_rng(seed, DATA_STREAM)
    points = rng.random((n, d))
    sizes = log_uniform_lengths(n, min_bytes, max_bytes, rng, driver=points[:, 0], skew=skew)
    return points, sizes


# ========== Text ==========

def format_coordinates(coords: Sequence[float], delimiter: str = ",") -> str:
    return delimiter.join(repr(float(c)) for c in coords)


def pad_line(text: str, length: int, delimiter: str = ",") -> str:
    """
    Append a filler field so the line plus its newline is `length` bytes.

    Lines already at or above the target keep their text unchanged.
    """
    filler = length - len(text) - len(delimiter) - 1
    if filler < 0:
        return text
    return f"{text}{delimiter}{'x' * filler}"


def gen_uniform(n: int, d: int, seed: int) -> Iterator[str]:
    for p in uniform_points(n, d, seed):
        yield format_coordinates(p)


def gen_diagonal(n: int, d: int, perc: float, buf: float, seed: int) -> Iterator[str]:
    for p in diagonal_points(n, d, perc, buf, seed):
        yield format_coordinates(p)


def gen_varsize(
    n: int,
    d: int,
    seed: int,
    min_bytes: int,
    max_bytes: int,
    skew: float = DEFAULT_SKEW,
) -> Iterator[str]:
    """Uniform points padded to log-uniform payload sizes."""
    points, sizes = varsize_dataset(n, d, seed, min_bytes, max_bytes, skew)
    for p, size in zip(points, sizes):
        yield pad_line(format_coordinates(p), int(size))


DATASETS = ("uniform", "diagonal", "varsize")


def generate_lines(
    kind: str,
    n: int,
    d: int,
    seed: int,
    perc: float = 0.05,
    buf: float = 0.1,
    min_bytes: int = 64,
    max_bytes: int = 65536,
    skew: float = DEFAULT_SKEW,
) -> Iterator[str]:
    """Lines of one of the synthetic datasets."""
    if kind == "uniform":
        return gen_uniform(n, d, seed)
    if kind == "diagonal":
        return gen_diagonal(n, d, perc, buf, seed)
    if kind == "varsize":
        return gen_varsize(n, d, seed, min_bytes, max_bytes, skew)
    raise ValueError(f"unknown dataset {kind!r}, expected one of {DATASETS}")


def dataset_arrays(kind: str, n: int, d: int, seed: int, **params) -> Tuple[np.ndarray, np.ndarray]:
    """
    Points and payload sizes of a synthetic dataset, without writing it.

    Sizes are the byte lengths (newline included) of the lines
    generate_lines yields for the same arguments.
    """
    if kind == "varsize":
        points, _ = varsize_dataset(
            n,
            d,
            seed,
            params.get("min_bytes", 64),
            params.get("max_bytes", 65536),
            params.get("skew", DEFAULT_SKEW),
        )
    elif kind == "uniform":
        points = uniform_points(n, d, seed)
    elif kind == "diagonal":
        points = diagonal_points(n, d, params.get("perc", 0.05), params.get("buf", 0.1), seed)
    else:
        raise ValueError(f"unknown dataset {kind!r}, expected one of {DATASETS}")
    lines = generate_lines(kind, n, d, seed, **params)
    sizes = np.fromiter((len(line.encode("utf-8")) + 1 for line in lines), dtype=np.int64, count=n)
    return points, sizes


def write_lines(path: Path, lines: Iterable[str]) -> Tuple[int, int]:
    """
    Write newline-terminated lines.

    Returns:
        (lines written, bytes written)
    """
    count = 0
    total = 0
    with open(path, "w", encoding="utf-8", newline="\n") as handle:
        for line in lines:
            handle.write(line + "\n")
            count += 1
            total += len(line.encode("utf-8")) + 1
    logger.info(f"Wrote {count} records ({total} bytes) to {path}")
    return count, total
