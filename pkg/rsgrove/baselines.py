"""
Reference partitioners: STR packing and median-split Kd-tree.

Both run on unweighted point counts and emit the same PartitionScheme
(with an aux tree) as the R*-style partitioner, so assignment, metrics
and the benchmark treat every partitioner alike. Curve partitioners live
in rsgrove.curves.
"""

from __future__ import annotations

from typing import List, Optional
import logging
import math

import numpy as np

from rsgrove.geometry import Envelope
from rsgrove.ingest_service import WeightedSample
from rsgrove.scheme import AuxLeaf, AuxNode, AuxSplit, Partition, PartitionScheme, cut_coordinate

logger = logging.getLogger(__name__)


def str_degree(partitions: int, d: int) -> int:
    """
    Smallest node degree n with n^d >= partitions.

    Example:
        >>> str_degree(800, 9)
        3
    """
    if partitions < 1 or d < 1:
        raise ValueError(f"need partitions >= 1 and d >= 1, got {partitions}, {d}")
    n = max(1, int(round(partitions ** (1.0 / d))))
    while n > 1 and (n - 1) ** d >= partitions:
        n -= 1
    while n ** d < partitions:
        n += 1
    return n


class _TreeBuilder:
    """Shared leaf bookkeeping for the aux-tree baselines."""

    def __init__(self, sample: WeightedSample):
        self.points = sample.points
        self.d = sample.dims
        self.partitions: List[Partition] = []
        self.fallback = sample.domain.center

    def leaf(self, idx: np.ndarray) -> AuxLeaf:
        pid = len(self.partitions)
        mbb = Envelope.of_points(self.points[idx]) if len(idx) else None
        self.partitions.append(Partition(pid, mbb, float(len(idx)), len(idx)))
        return AuxLeaf(pid)

    def cut(self, left: np.ndarray, right: np.ndarray, axis: int) -> float:
        """Coordinate between two groups of point indices, each sorted along axis."""
        below = float(self.points[left[-1], axis]) if len(left) else None
        above = float(self.points[right[0], axis]) if len(right) else None
        return cut_coordinate(below, above, self.fallback[axis])


# ========== STR ==========

class _STRBuilder(_TreeBuilder):
    def __init__(self, sample: WeightedSample, degree: int):
        super().__init__(sample)
        self.degree = degree

    def build(self, idx: np.ndarray, dim: int) -> AuxNode:
        if dim == self.d:
            return self.leaf(idx)
        order = idx[np.argsort(self.points[idx, dim], kind="stable")]
        runs = np.array_split(order, self.degree)
        return self.tile(runs, 0, len(runs), dim)

    def tile(self, runs: List[np.ndarray], a: int, b: int, dim: int) -> AuxNode:
        if b - a == 1:
            return self.build(runs[a], dim + 1)
        mid = (a + b) // 2
        left = np.concatenate(runs[a:mid])
        right = np.concatenate(runs[mid:b])
        node = AuxSplit(dim, self.cut(left, right, dim))
        node.left = self.tile(runs, a, mid, dim)
        node.right = self.tile(runs, mid, b, dim)
        return node


def str_partition(
    sample: WeightedSample,
    max_capacity: float,
    disjoint: bool = True,
    partitions: Optional[int] = None,
    block_size: Optional[int] = None,
) -> PartitionScheme:
    """
    Sort-tile-recursive partitioning generalized to d dimensions.

    P = ceil(|S| / M) desired leaves give a node degree n, the smallest
    integer with n^d >= P. The sample is sorted on dimension 0 and cut
    into n runs of equal count (remainder to the first runs), each run is
    sorted on dimension 1 and cut again, and so on, giving exactly n^d
    partitions, some possibly empty.

    Args:
        sample: Sample points (weights are ignored)
        max_capacity: M, points per partition
        disjoint: Mode recorded in the scheme
        partitions: Override of the desired leaf count P
        block_size: Recorded in the scheme

    Example:
        P = 800 in 9 dimensions -> n = 3 and 3^9 = 19683 partitions
    """
    desired = partitions if partitions is not None else max(1, math.ceil(sample.size / max_capacity))
    degree = str_degree(desired, sample.dims)
    builder = _STRBuilder(sample, degree)
    root = builder.build(np.arange(sample.size), 0)
    empty = sum(1 for p in builder.partitions if p.point_count == 0)
    logger.info(
        f"STR with degree {degree} produced {len(builder.partitions)} partitions "
        f"for P={desired} ({empty} empty)"
    )
    return PartitionScheme(
        partitions=builder.partitions,
        d=sample.dims,
        disjoint=disjoint,
        aux=root,
        partitioner="str",
        block_size=block_size,
        max_capacity=max_capacity,
    )


# ========== Kd-tree ==========

class _KdBuilder(_TreeBuilder):
    def __init__(self, sample: WeightedSample, max_capacity: float):
        super().__init__(sample)
        self.max_capacity = max_capacity

    def build(self, idx: np.ndarray, depth: int) -> AuxNode:
        n = len(idx)
        if n <= self.max_capacity:
            return self.leaf(idx)
        axis = depth % self.d
        order = idx[np.argsort(self.points[idx, axis], kind="stable")]
        half = (n + 1) // 2
        left, right = order[:half], order[half:]
        node = AuxSplit(axis, self.cut(left, right, axis))
        node.left = self.build(left, depth + 1)
        node.right = self.build(right, depth + 1)
        return node


def kdtree_partition(
    sample: WeightedSample,
    max_capacity: float,
    disjoint: bool = True,
    block_size: Optional[int] = None,
) -> PartitionScheme:
    """
    Recursive median split cycling through the axes (axis = depth mod d).

    The left child takes ceil(n / 2) points; recursion stops once a node
    holds at most M points.

    Example:
        6 points with M = 2 -> leaves of 2, 1, 2 and 1 points
    """
    builder = _KdBuilder(sample, max_capacity)
    root = builder.build(np.arange(sample.size), 0)
    logger.info(f"Kd-tree produced {len(builder.partitions)} partitions")
    return PartitionScheme(
        partitions=builder.partitions,
        d=sample.dims,
        disjoint=disjoint,
        aux=root,
        partitioner="kdtree",
        block_size=block_size,
        max_capacity=max_capacity,
    )
