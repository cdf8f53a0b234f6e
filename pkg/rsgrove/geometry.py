"""
Multi-dimensional points and axis-aligned boxes.

Envelope is the MBR currency of the whole pipeline: partition boundaries,
record extents, query boxes and aux-tree cells are all envelopes. Only
min/max are used in predicates, no epsilon. Touching boxes intersect with
zero volume.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Optional, Sequence, Tuple
import math

import numpy as np

from rsgrove.errors import DimensionMismatchError

Point = Tuple[float, ...]


def as_point(coords: Iterable[float]) -> Point:
    """
    Validate and freeze a coordinate vector.

    Raises:
        ValueError: If the vector is empty or has a non-finite coordinate
    """
    point = tuple(float(c) for c in coords)
    if not point:
        raise ValueError("a point needs at least one coordinate")
    if not all(math.isfinite(c) for c in point):
        raise ValueError(f"non-finite coordinate in {point}")
    return point


@dataclass(frozen=True)
class Envelope:
    """
    Axis-aligned d-dimensional box [lo, hi].

    Attributes:
        lo: Lower corner, one value per dimension
        hi: Upper corner, lo[k] <= hi[k] for every k

    Degenerate (zero-extent) boxes are allowed; a point record is stored as
    the envelope [p, p]. Bounds may be infinite only for aux-tree cells.
    """

    lo: Tuple[float, ...]
    hi: Tuple[float, ...]

    def __post_init__(self) -> None:
        if len(self.lo) != len(self.hi):
            raise DimensionMismatchError(
                f"lo has {len(self.lo)} coordinates but hi has {len(self.hi)}"
            )
        if not self.lo:
            raise ValueError("an envelope needs at least one dimension")
        for k, (a, b) in enumerate(zip(self.lo, self.hi)):
            if not a <= b:
                raise ValueError(f"lo[{k}]={a} > hi[{k}]={b}")

    @classmethod
    def of_point(cls, p: Sequence[float]) -> "Envelope":
        point = tuple(float(c) for c in p)
        return cls(point, point)

    @classmethod
    def of_points(cls, points: np.ndarray) -> "Envelope":
        """Tight envelope of an (n, d) array of points, n >= 1."""
        if len(points) == 0:
            raise ValueError("cannot bound an empty point set")
        return cls(
            tuple(float(v) for v in points.min(axis=0)),
            tuple(float(v) for v in points.max(axis=0)),
        )

    @classmethod
    def infinite(cls, d: int) -> "Envelope":
        return cls((-math.inf,) * d, (math.inf,) * d)

    @property
    def dims(self) -> int:
        return len(self.lo)

    @property
    def center(self) -> Point:
        return tuple((a + b) / 2.0 for a, b in zip(self.lo, self.hi))

    def contains_point(self, p: Sequence[float]) -> bool:
        return all(a <= c <= b for a, c, b in zip(self.lo, p, self.hi))

    def contains(self, other: "Envelope") -> bool:
        _check_dims(self, other)
        return all(
            a <= c and d <= b
            for a, b, c, d in zip(self.lo, self.hi, other.lo, other.hi)
        )

    def intersects(self, other: "Envelope") -> bool:
        _check_dims(self, other)
        return all(
            max(a, c) <= min(b, d)
            for a, b, c, d in zip(self.lo, self.hi, other.lo, other.hi)
        )


def _check_dims(a: Envelope, b: Envelope) -> None:
    if a.dims != b.dims:
        raise DimensionMismatchError(f"{a.dims}-d envelope vs {b.dims}-d envelope")


# ========== Measures ==========

def volume(e: Envelope) -> float:
    """Product of side lengths; 0.0 for degenerate boxes."""
    result = 1.0
    for a, b in zip(e.lo, e.hi):
        result *= b - a
    return result


def margin(e: Envelope) -> float:
    """Sum of side lengths."""
    return sum(b - a for a, b in zip(e.lo, e.hi))


# ========== Combinators ==========

def intersection(a: Envelope, b: Envelope) -> Optional[Envelope]:
    """
    Component-wise max(lo) / min(hi).

    Returns:
        The overlap region, a zero-volume envelope for touching boxes,
        or None when the boxes are disjoint in any dimension

    Raises:
        DimensionMismatchError: If a and b differ in dimensionality
    """
    _check_dims(a, b)
    lo = tuple(max(x, y) for x, y in zip(a.lo, b.lo))
    hi = tuple(min(x, y) for x, y in zip(a.hi, b.hi))
    if any(l > h for l, h in zip(lo, hi)):
        return None
    return Envelope(lo, hi)


def union(a: Envelope, b: Envelope) -> Envelope:
    """Smallest envelope containing both inputs."""
    _check_dims(a, b)
    return Envelope(
        tuple(min(x, y) for x, y in zip(a.lo, b.lo)),
        tuple(max(x, y) for x, y in zip(a.hi, b.hi)),
    )


def expand(e: Envelope, p: Sequence[float]) -> Envelope:
    """Grow e just enough to contain point p."""
    if len(p) != e.dims:
        raise DimensionMismatchError(f"{e.dims}-d envelope vs {len(p)}-d point")
    return Envelope(
        tuple(min(x, c) for x, c in zip(e.lo, p)),
        tuple(max(x, c) for x, c in zip(e.hi, p)),
    )


def enlargement(e: Envelope, x: Envelope) -> Tuple[float, float]:
    """
    Growth of e needed to absorb x.

    Returns:
        (volume delta, margin delta), both >= 0
    """
    grown = union(e, x)
    return volume(grown) - volume(e), margin(grown) - margin(e)


# ========== Array helpers ==========

def prefix_bounds(points: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """
    Running MBRs of the first k points, k = 1..n.

    Returns:
        (lo, hi) arrays of shape (n, d); row k-1 bounds points[:k]
    """
    return np.minimum.accumulate(points, axis=0), np.maximum.accumulate(points, axis=0)


def suffix_bounds(points: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """Running MBRs of points[k:], row k bounds points[k:]."""
    lo, hi = prefix_bounds(points[::-1])
    return lo[::-1], hi[::-1]
