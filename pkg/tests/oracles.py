"""Brute-force oracles the partitioned answers are checked against."""

from typing import Sequence

import numpy as np

from rsgrove.geometry import Envelope


def random_boxes(rng: np.random.Generator, n: int, d: int = 2, max_side: float = 0.02) -> np.ndarray:
    """(n, 2d) rows of lo then hi corners of small boxes in the unit cube."""
    lo = rng.random((n, d))
    hi = np.minimum(lo + rng.random((n, d)) * max_side, 1.0)
    return np.hstack([lo, hi])


def brute_force_hits(lo: np.ndarray, hi: np.ndarray, box: Envelope) -> np.ndarray:
    """Indices of boxes meeting `box` (closed intervals)."""
    qlo = np.asarray(box.lo)
    qhi = np.asarray(box.hi)
    return np.flatnonzero(np.all(lo <= qhi, axis=1) & np.all(hi >= qlo, axis=1))


def brute_force_join_count(
    lo_a: np.ndarray,
    hi_a: np.ndarray,
    lo_b: np.ndarray,
    hi_b: np.ndarray,
    chunk: int = 500,
) -> int:
    """Nested-loop intersection count, chunked over the left side."""
    total = 0
    for start in range(0, len(lo_a), chunk):
        alo = lo_a[start:start + chunk, None, :]
        ahi = hi_a[start:start + chunk, None, :]
        meets = np.all(lo_b[None] <= ahi, axis=2) & np.all(hi_b[None] >= alo, axis=2)
        total += int(meets.sum())
    return total


def half_open_cells(cells: dict, p: Sequence[float]) -> list:
    """Ids of aux cells holding p, each cell taken as [lo, hi) per axis."""
    return [
        pid for pid, cell in cells.items()
        if all(a <= c < b for a, c, b in zip(cell.lo, p, cell.hi))
    ]
