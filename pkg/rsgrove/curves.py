"""
Space-filling curve keys (Z-order and Hilbert) and the curve partitioner.

Coordinates are normalized onto a 2^b grid per dimension, b = 63 // d, so
a key of b * d bits fits an unsigned 64-bit integer. Dimension 0 holds the
most significant bit of every interleaved group.
"""

from __future__ import annotations

from typing import Optional, Sequence
import logging
import math

import numpy as np

from rsgrove.geometry import Envelope
from rsgrove.ingest_service import WeightedSample
from rsgrove.scheme import KeyRanges, Partition, PartitionScheme

logger = logging.getLogger(__name__)

KEY_BITS = 63
CURVES = ("z", "hilbert")

_ONE = np.uint64(1)


def default_bits(d: int) -> int:
    if d < 1:
        raise ValueError(f"dimensionality must be >= 1, got {d}")
    return KEY_BITS // d


def grid_coordinates(points: np.ndarray, domain: Envelope, bits: int) -> np.ndarray:
    """
    Map points onto the integer grid [0, 2^bits) per dimension.

    Points outside the domain are clamped to the boundary cells.
    """
    points = np.atleast_2d(np.asarray(points, dtype=np.float64))
    lo = np.asarray(domain.lo)
    extent = np.asarray(domain.hi) - lo
    cells = float(1 << bits)
    with np.errstate(divide="ignore", invalid="ignore"):
        scaled = np.floor((points - lo) / extent * cells)
    scaled = np.where(extent > 0, scaled, 0.0)
    idx = np.clip(scaled, 0, cells).astype(np.uint64)
    return np.minimum(idx, np.uint64((1 << bits) - 1))


def interleave(grid: np.ndarray, bits: int) -> np.ndarray:
    """Morton interleave of (n, d) grid coordinates, dimension 0 most significant."""
    grid = np.atleast_2d(np.asarray(grid, dtype=np.uint64))
    n, d = grid.shape
    if bits * d > 64:
        raise ValueError(f"{bits} bits x {d} dims do not fit 64-bit keys")
    keys = np.zeros(n, dtype=np.uint64)
    for bit in range(bits - 1, -1, -1):
        shift = np.uint64(bit)
        for k in range(d):
            keys = (keys << _ONE) | ((grid[:, k] >> shift) & _ONE)
    return keys


def hilbert_transpose(grid: np.ndarray, bits: int) -> np.ndarray:
    """
    Skilling's axes-to-transpose Hilbert transform, vectorized over rows.

    Returns the transposed form: interleaving its columns gives the
    Hilbert index.
    """
    x = np.array(np.atleast_2d(grid), dtype=np.uint64)
    n, d = x.shape
    top = np.uint64(1 << (bits - 1)) if bits > 0 else np.uint64(0)

    # inverse undo
    q = top
    while q > _ONE:
        p = q - _ONE
        for i in range(d):
            hit = (x[:, i] & q) != 0
            x[hit, 0] ^= p
            t = (x[:, 0] ^ x[:, i]) & p
            t[hit] = 0
            x[:, 0] ^= t
            x[:, i] ^= t
        q >>= _ONE

    # gray encode
    for i in range(1, d):
        x[:, i] ^= x[:, i - 1]
    t = np.zeros(n, dtype=np.uint64)
    q = top
    while q > _ONE:
        hit = (x[:, d - 1] & q) != 0
        t[hit] ^= q - _ONE
        q >>= _ONE
    x ^= t[:, None]
    return x


def z_encode(points: np.ndarray, domain: Envelope, bits: Optional[int] = None) -> np.ndarray:
    """
    Z-order keys of an (n, d) point array.

    Example:
        d=2, bits=1, cell (1, 1) -> key 3
    """
    points = np.atleast_2d(np.asarray(points, dtype=np.float64))
    bits = default_bits(points.shape[1]) if bits is None else bits
    return interleave(grid_coordinates(points, domain, bits), bits)


def hilbert_encode(points: np.ndarray, domain: Envelope, bits: Optional[int] = None) -> np.ndarray:
    """Hilbert keys of an (n, d) point array."""
    points = np.atleast_2d(np.asarray(points, dtype=np.float64))
    bits = default_bits(points.shape[1]) if bits is None else bits
    grid = grid_coordinates(points, domain, bits)
    return interleave(hilbert_transpose(grid, bits), bits)


def curve_keys(curve: str, points: np.ndarray, domain: Envelope, bits: int) -> np.ndarray:
    if curve == "z":
        return z_encode(points, domain, bits)
    if curve == "hilbert":
        return hilbert_encode(points, domain, bits)
    raise ValueError(f"unknown curve {curve!r}, expected one of {CURVES}")


def curve_partition(
    sample: WeightedSample,
    max_capacity: float,
    curve: str = "z",
    disjoint: bool = False,
    block_size: Optional[int] = None,
) -> PartitionScheme:
    """
    Sort the sample along a space-filling curve and cut it into
    ceil(|S| / M) consecutive runs of near-equal count.

    Cuts only fall where the key changes, so every sample point routes to
    its own run; a cut inside a group of equal keys moves to the start of
    the group and runs that become empty are merged away.

    Args:
        sample: Sample points (weights are ignored)
        max_capacity: M, points per partition
        curve: "z" or "hilbert"
        disjoint: Mode recorded in the scheme; curve schemes always route
            each record to exactly one run by the key of its center
        block_size: Recorded in the scheme

    Returns:
        PartitionScheme with a key-range table instead of an aux tree

    Example:
        |S| = 28, M = 10 -> runs of 10, 9 and 9 points
    """
    d = sample.dims
    bits = default_bits(d)
    keys = curve_keys(curve, sample.points, sample.domain, bits)
    order = np.argsort(keys, kind="stable")
    sorted_keys = keys[order]
    n_runs = max(1, math.ceil(sample.size / max_capacity))
    targets = np.cumsum([len(run) for run in np.array_split(order, n_runs)])[:-1]
    cuts = np.unique(np.searchsorted(sorted_keys, sorted_keys[targets], side="left"))
    runs = np.split(order, cuts[cuts > 0])
    if len(runs) < n_runs:
        logger.warning(f"Merged {n_runs - len(runs)} curve runs that shared keys at their boundary")

    partitions = []
    lower_keys = []
    for pid, run in enumerate(runs):
        lower_keys.append(0 if pid == 0 else int(keys[run[0]]))
        pts = sample.points[run]
        partitions.append(
            Partition(
                id=pid,
                mbb=Envelope.of_points(pts) if len(run) else None,
                expected_weight=float(len(run)),
                point_count=len(run),
            )
        )
    logger.info(f"{curve}-curve partitioner produced {len(partitions)} runs")
    return PartitionScheme(
        partitions=partitions,
        d=d,
        disjoint=disjoint,
        key_ranges=KeyRanges(curve=curve, bits=bits, domain=sample.domain, lower_keys=tuple(lower_keys)),
        partitioner="zcurve" if curve == "z" else "hcurve",
        block_size=block_size,
        max_capacity=max_capacity,
    )


def route_by_key(key_ranges: KeyRanges, points: Sequence[Sequence[float]]) -> np.ndarray:
    """Run index of every point under a key-range table."""
    keys = curve_keys(key_ranges.curve, np.asarray(points, dtype=np.float64), key_ranges.domain, key_ranges.bits)
    return key_ranges.route_keys(keys)
