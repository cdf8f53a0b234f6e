"""
Phase 2: compute partition boundaries from the (weighted) sample.

Top-down R*-style node splitting. Every split keeps both sides at a
valid size, i.e. a total that can still be cut into parts within [m, M],
so every final partition ends up between the lower and upper capacity.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import List, Optional, Sequence, Tuple, Union
import logging
import math

import numpy as np
from pydantic import BaseModel, Field

from rsgrove.errors import (
    EmptyInputError,
    GroveInternalError,
    InsufficientSampleError,
    InvalidPartitionSizeError,
    NoSplitCandidateError,
)
from rsgrove.geometry import Envelope, prefix_bounds, suffix_bounds
from rsgrove.ingest_service import WeightedSample
from rsgrove.scheme import AuxLeaf, AuxNode, AuxSplit, Partition, PartitionScheme, cut_coordinate

logger = logging.getLogger(__name__)

BLACKBOX_MIN_FRACTION = 0.3
WEIGHT_TOLERANCE = 1e-9  # relative slack between prefix sums and per-node sums


# ========== Capacity ==========

class CapacityConfig(BaseModel):
    """
    Partition capacity derived from the sample.

    Example:
        {
            "block_size": 134217728, "alpha": 0.95, "rho": 0.4,
            "desired_partitions": 1024, "max_capacity": 10, "min_capacity": 9,
            "weighted": false
        }
    """

    block_size: int = Field(..., gt=0, description="Block size B in bytes")
    alpha: float = Field(..., gt=0.0, lt=1.0, description="Balance factor")
    rho: float = Field(0.4, ge=0.0, le=0.5, description="Minimum splitting ratio")
    desired_partitions: int = Field(..., ge=1, description="N")
    max_capacity: Union[int, float] = Field(..., gt=0, description="M, points or bytes per partition")
    min_capacity: Union[int, float] = Field(..., gt=0, description="m, lower capacity")
    weighted: bool = False

    @property
    def bounds(self) -> Tuple[float, float]:
        return self.min_capacity, self.max_capacity


def compute_capacity(
    sample: WeightedSample,
    block_size: int,
    alpha: float,
    rho: float = 0.4,
    weighted: Optional[bool] = None,
    check: bool = True,
) -> CapacityConfig:
    """
    Derive M and m so that a partition of M sample units fills one block.

    Record-count mode: M = ceil(|S| * B / D), m = max(1, floor(alpha * M)).
    Weighted mode: N = ceil(D / B), M = ceil(W / N), m = alpha * M.

    Args:
        sample: Sample with its global totals
        block_size: B in bytes
        alpha: Balance factor in (0, 1)
        rho: Minimum splitting ratio carried into the config
        weighted: Force a mode; defaults to sample.weighted
        check: Verify the sample total is a valid size for [m, M]

    Returns:
        CapacityConfig

    Raises:
        EmptyInputError: If D is 0
        InsufficientSampleError: If the sample total is invalid and below S*
        InvalidPartitionSizeError: If the sample total is invalid for [m, M]
    """
    if block_size <= 0:
        raise ValueError(f"block size must be positive, got {block_size}")
    if not 0.0 < alpha < 1.0:
        raise ValueError(f"balance factor must be in (0, 1), got {alpha}")
    total_size = sample.total_input_size
    if total_size <= 0:
        raise EmptyInputError("input holds no bytes")
    weighted = sample.weighted if weighted is None else weighted

    if weighted:
        n_parts = -(-total_size // block_size)
        total = sample.total_weight
        upper: float = float(math.ceil(total / n_parts))
        lower: float = alpha * upper
    else:
        total = sample.size
        upper = -(-total * block_size // total_size)
        lower = max(1, math.floor(alpha * upper))
        n_parts = -(-total // upper)

    if lower > upper:
        raise InvalidPartitionSizeError(f"alpha={alpha} gives m={lower} > M={upper}")

    cfg = CapacityConfig(
        block_size=block_size,
        alpha=alpha,
        rho=rho,
        desired_partitions=max(1, n_parts),
        max_capacity=upper,
        min_capacity=lower,
        weighted=weighted,
    )
    if check:
        _check_sample_total(total, cfg, sample)
    logger.info(
        f"Capacity: M={upper}, m={lower}, N={cfg.desired_partitions} "
        f"({'weighted' if weighted else 'record-count'} mode, total {total})"
    )
    return cfg


def _check_sample_total(total: float, cfg: CapacityConfig, sample: WeightedSample) -> None:
    m, M = cfg.bounds
    valid = is_valid(total, m, M)
    if m >= M:
        if not valid:
            raise InvalidPartitionSizeError(f"total {total} is not a multiple of M={M}")
        return
    threshold = min_valid_size(m, M)
    if total >= threshold:
        return
    if valid:
        logger.warning(f"Sample total {total} is below S*={threshold} but still valid for [{m}, {M}]")
        return
    ratio = sample.size / sample.record_count if sample.record_count else 1.0
    needed = min_sample_bytes(cfg.alpha, ratio, cfg.block_size)
    raise InsufficientSampleError(
        f"sample total {total} cannot be split into parts within [{m}, {M}]; "
        f"any total >= {threshold} can. Sample at least {needed:.0f} bytes "
        f"(sampling ratio {ratio:.4g}, block size {cfg.block_size})"
    )


def min_sample_bytes(alpha: float, ratio: float, block_size: int) -> float:
    """
    Smallest sample storage size that guarantees a valid partitioning.

    Returns:
        ceil(alpha / (1 - alpha)) * alpha * ceil(ratio * block_size) bytes

    Example:
        >>> round(min_sample_bytes(0.95, 0.01, 128_000_000))
        23104000
    """
    if not 0.0 < alpha < 1.0:
        raise ValueError(f"balance factor must be in (0, 1), got {alpha}")
    if not 0.0 < ratio <= 1.0:
        raise ValueError(f"sampling ratio must be in (0, 1], got {ratio}")
    # rounding keeps 0.95/0.05 == 19 and 0.01 * 128e6 == 1.28e6 from drifting up a unit
    return math.ceil(round(alpha / (1.0 - alpha), 9)) * alpha * math.ceil(round(ratio * block_size, 9))


# ========== Validity ==========

def _is_integral(*values: float) -> bool:
    return all(isinstance(v, (int, np.integer)) and not isinstance(v, bool) for v in values)


def is_valid(total: float, m: float, M: float) -> bool:
    """
    Whether `total` can be split into parts each within [m, M].

    True iff ceil(total / M) <= floor(total / m). Integers use exact
    integer arithmetic; reals apply ceil/floor with no epsilon.

    Example:
        >>> is_valid(28, 9, 10), is_valid(62, 9, 10), is_valid(14, 9, 10)
        (True, False, False)
    """
    if not 0 < m <= M:
        raise ValueError(f"need 0 < m <= M, got m={m}, M={M}")
    if total <= 0:
        return False
    if _is_integral(total, m, M):
        return -(-total // M) <= total // m
    return math.ceil(total / M) <= math.floor(total / m)


def _valid_mask(totals: np.ndarray, m: float, M: float) -> np.ndarray:
    """Element-wise is_valid over an array of totals."""
    if np.issubdtype(totals.dtype, np.integer) and _is_integral(m, M):
        return (totals > 0) & (-(-totals // M) <= totals // m)
    return (totals > 0) & (np.ceil(totals / M) <= np.floor(totals / m))


def min_valid_size(m: float, M: float) -> float:
    """
    S*: every total at or above it is valid for [m, M].

    Returns:
        ceil(m / (M - m)) * m

    Raises:
        InvalidPartitionSizeError: If m == M
    """
    if not 0 < m <= M:
        raise ValueError(f"need 0 < m <= M, got m={m}, M={M}")
    if m == M:
        raise InvalidPartitionSizeError("S* is undefined for m == M")
    if _is_integral(m, M):
        return -(-m // (M - m)) * m
    return math.ceil(m / (M - m)) * m


# ========== Split search ==========

def _sorted_along(points: np.ndarray, weights: np.ndarray, axis: int) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    order = np.argsort(points[:, axis], kind="stable")
    return order, points[order], weights[order]


def _side_weights(weights: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """Left and right totals for every candidate k = 1..n-1 (k = left count)."""
    cum = np.cumsum(weights)
    left = cum[:-1]
    return left, cum[-1] - left


def choose_split_axis(points: np.ndarray, weights: np.ndarray, min_side: float) -> int:
    """
    Axis whose candidate splits have the smallest total margin.

    For every axis the points are sorted along it and margin(P1) + margin(P2)
    is summed over every split that leaves at least `min_side` weight on
    each side. Ties go to the lower axis. An axis along which every point
    has the same coordinate yields to the axis of largest spread.

    Raises:
        NoSplitCandidateError: If no split leaves min_side on both sides
    """
    n, d = points.shape
    if n < 2:
        raise NoSplitCandidateError("a single point cannot be split")

    sums = np.full(d, np.inf)
    for axis in range(d):
        _, pts, w = _sorted_along(points, weights, axis)
        left, right = _side_weights(w)
        ok = (left >= min_side) & (right >= min_side)
        if not ok.any():
            continue
        plo, phi = prefix_bounds(pts)
        slo, shi = suffix_bounds(pts)
        margins = (phi[:-1] - plo[:-1]).sum(axis=1) + (shi[1:] - slo[1:]).sum(axis=1)
        sums[axis] = margins[ok].sum()
    if not np.isfinite(sums).any():
        raise NoSplitCandidateError(f"no split of {n} points leaves {min_side} on both sides")

    axis = int(np.argmin(sums))
    spread = points.max(axis=0) - points.min(axis=0)
    if spread[axis] == 0 and spread.max() > 0:
        axis = int(np.argmax(spread))
    return axis


def _best_candidate(points: np.ndarray, ks: np.ndarray) -> int:
    """
    Lowest-cost split among candidate left counts `ks`.

    Cost is the total volume of both child MBRs; ties go to the smaller
    overlap, then to the more balanced split, then to the smaller k.
    """
    if ks.size == 0:
        return -1
    n = len(points)
    plo, phi = prefix_bounds(points)
    slo, shi = suffix_bounds(points)
    lo1, hi1 = plo[ks - 1], phi[ks - 1]
    lo2, hi2 = slo[ks], shi[ks]
    cost = np.prod(hi1 - lo1, axis=1) + np.prod(hi2 - lo2, axis=1)
    overlap = np.prod(np.clip(np.minimum(hi1, hi2) - np.maximum(lo1, lo2), 0.0, None), axis=1)
    balance = np.abs(ks - (n + 1) // 2)
    best = np.lexsort((ks, balance, overlap, cost))[0]
    return int(ks[best])


def _distinct_boundary(points: np.ndarray, axis: int) -> np.ndarray:
    """For k = 1..n-1: do points k-1 and k differ along axis."""
    coords = points[:, axis]
    return coords[:-1] != coords[1:]


def choose_split_point(points: np.ndarray, min_side: float, weights: Optional[np.ndarray] = None) -> int:
    """
    Best unconstrained split of points sorted along the split axis.

    Args:
        points: (n, d) points sorted along the chosen axis
        min_side: Minimum count (or weight) on each side
        weights: Optional weights, unit weights by default

    Returns:
        Left count k, or -1 if no split leaves min_side on both sides
    """
    w = np.ones(len(points)) if weights is None else np.asarray(weights, dtype=np.float64)
    if len(points) < 2:
        return -1
    left, right = _side_weights(w)
    ks = np.flatnonzero((left >= min_side) & (right >= min_side)) + 1
    return _best_candidate(points, ks)


def _valid_candidates(
    weights: np.ndarray,
    m: float,
    M: float,
    lower: float,
    distinct: Optional[np.ndarray] = None,
) -> np.ndarray:
    left, right = _side_weights(weights)
    ok = (left >= lower) & (right >= lower) & _valid_mask(left, m, M) & _valid_mask(right, m, M)
    if distinct is not None:
        ok &= distinct
    return np.flatnonzero(ok) + 1


def choose_valid_split_point(points: np.ndarray, m: int, M: int, rho: float = 0.0) -> int:
    """
    Best split of n equal-weight points where both sides stay valid.

    Candidates k need k and n - k valid for [m, M] and at least
    max(m, rho * n) points on each side.

    Returns:
        Left count k, or -1 if no candidate exists

    Example:
        28 points, m=9, M=10 only admits k in {9, 10, 18, 19}
    """
    n = len(points)
    if n < 2:
        return -1
    counts = np.ones(n, dtype=np.int64)
    ks = _valid_candidates(counts, m, M, max(m, rho * n))
    return _best_candidate(points, ks)


def choose_weighted_split_point(
    points: np.ndarray,
    weights: np.ndarray,
    m: float,
    M: float,
    rho: float = 0.0,
) -> int:
    """
    Best split of weighted points where both side totals stay valid.

    Candidates k need W1 = sum(weights[:k]) and W - W1 valid for [m, M]
    and at least max(m, rho * W) on each side.

    Returns:
        Left count k, or -1 if no candidate exists

    Example:
        weights (200, 200, 100, 300, 200) with [450, 550] -> k = 3
    """
    weights = np.asarray(weights, dtype=np.float64)
    if len(points) < 2:
        return -1
    ks = _valid_candidates(weights, m, M, max(m, rho * weights.sum()))
    return _best_candidate(points, ks)


# ========== Weight correction ==========

def enumerate_valid_ranges(total: float, m: float, M: float) -> List[Tuple[float, float]]:
    """
    Ranges of left totals W1 for which both W1 and total - W1 are valid.

    W1 must lie in some [i*m, i*M] and total - W1 in some [j*m, j*M], so
    for every i >= 1 and j in [max(1, j1), j2] with
    j1 = ceil((total - i*M) / M) and j2 = floor((total - i*m) / m) the
    range [max(i*m, total - j*M), min(i*M, total - j*m)] is emitted.
    Overlapping ranges are merged.

    Raises:
        InvalidPartitionSizeError: If total itself is not valid

    Example:
        >>> enumerate_valid_ranges(28, 9, 10)
        [(9, 10), (18, 19)]
    """
    if not is_valid(total, m, M):
        raise InvalidPartitionSizeError(f"total {total} is not valid for [{m}, {M}]")
    ranges: List[Tuple[float, float]] = []
    i = 1
    while i * m <= total:
        j1 = math.ceil((total - i * M) / M)
        j2 = math.floor((total - i * m) / m)
        for j in range(max(1, j1), j2 + 1):
            start = max(i * m, total - j * M)
            end = min(i * M, total - j * m)
            if start <= end:
                ranges.append((start, end))
        i += 1

    ranges.sort()
    merged: List[Tuple[float, float]] = []
    for start, end in ranges:
        if merged and start <= merged[-1][1]:
            merged[-1] = (merged[-1][0], max(merged[-1][1], end))
        else:
            merged.append((start, end))
    return merged


def correct_weights(
    positions: np.ndarray,
    weights: np.ndarray,
    empty_ranges: Sequence[Tuple[float, float]],
) -> np.ndarray:
    """
    Move one point position into every empty valid range.

    Ranges are processed left to right. For a range [vs, ve] the first
    point whose position exceeds ve is moved to the middle of the range:
    its weight drops by delta = pos - (vs + ve) / 2 and the next point's
    weight grows by delta, so the total is unchanged.

    Args:
        positions: Cumulative weights, positions[i] = sum(weights[:i + 1])
        weights: Point weights in split-axis order
        empty_ranges: Valid ranges that hold no position

    Returns:
        Corrected copy of weights

    Raises:
        GroveInternalError: If a corrected weight is not positive
    """
    corrected = np.array(weights, dtype=np.float64)
    pos = np.array(positions, dtype=np.float64)
    for start, end in sorted(empty_ranges):
        after = np.flatnonzero(pos > end)
        if after.size == 0 or after[0] + 1 >= len(corrected):
            logger.warning(f"No point to move into valid range [{start}, {end}]; skipping")
            continue
        i = int(after[0])
        delta = pos[i] - (start + end) / 2.0
        corrected[i] -= delta
        corrected[i + 1] += delta
        if corrected[i] <= 0:
            raise GroveInternalError(
                f"weight correction for [{start}, {end}] left point {i} with weight {corrected[i]}"
            )
        pos = np.cumsum(corrected)
        logger.debug(f"Moved point {i} by {delta} into [{start}, {end}]")
    return corrected


# ========== Top-down partitioning ==========

@dataclass
class _Node:
    idx: np.ndarray
    depth: int
    parent: Optional[AuxSplit]
    is_left: bool


def termination_bound(total: float, M: float, rho: float) -> int:
    """Upper bound on rho-constrained splits along any root-to-leaf path."""
    if rho <= 0.0:
        return 0
    ratio = max(2.0, total / M)
    return math.ceil(math.log(ratio) / math.log(1.0 / (1.0 - rho))) + 1


class GrovePartitioner:
    """
    Top-down split of a sample into partitions with the aux tree that
    records every split.

    Strategies:
        blackbox: unconstrained split with m = 0.3 M, no validity filter
        graybox: validity-constrained split on point counts
        grove: validity-constrained split on histogram weights with
               weight correction

    Example:
        cfg = compute_capacity(sample, block_size, alpha)
        scheme = GrovePartitioner(sample, cfg, "grove").run()
    """

    def __init__(self, sample: WeightedSample, cfg: CapacityConfig, strategy: str = "grove", disjoint: bool = True):
        if strategy not in ("blackbox", "graybox", "grove"):
            raise ValueError(f"unknown strategy {strategy!r}")
        if sample.size == 0:
            raise EmptyInputError("cannot partition an empty sample")
        self.sample = sample
        self.cfg = cfg
        self.strategy = strategy
        self.disjoint = disjoint
        self.points = sample.points
        if cfg.weighted and strategy == "grove":
            self.weights = np.array(sample.weights, dtype=np.float64)
        else:
            self.weights = np.ones(sample.size, dtype=np.int64)
        self.total = float(self.weights.sum())
        self.corrections = 0
        self.relaxed = 0
        self.max_constrained_depth = 0
        self.assignment = np.full(sample.size, -1, dtype=np.int64)

    def run(self) -> PartitionScheme:
        m, M = self.cfg.bounds
        if self.strategy != "blackbox" and not is_valid(self._total_of(self.weights), m, M):
            raise InvalidPartitionSizeError(
                f"sample total {self.total} cannot be split into parts within [{m}, {M}]"
            )
        bound = termination_bound(self.total, M, self.cfg.rho)
        partitions: List[Partition] = []
        root: Optional[AuxNode] = None
        stack = [_Node(np.arange(self.sample.size), 0, None, False)]
        while stack:
            node = stack.pop()
            split = self._split(node.idx)
            if split is None:
                pid = len(partitions)
                partitions.append(self._leaf(pid, node.idx))
                made: AuxNode = AuxLeaf(pid)
            else:
                axis, coord, left, right, constrained = split
                made = AuxSplit(axis, coord)
                depth = node.depth + int(constrained)
                self.max_constrained_depth = max(self.max_constrained_depth, depth)
                if bound and depth > bound:
                    raise GroveInternalError(f"constrained split depth {depth} exceeds bound {bound}")
                stack.append(_Node(right, depth, made, False))
                stack.append(_Node(left, depth, made, True))
            if node.parent is None:
                root = made
            elif node.is_left:
                node.parent.left = made
            else:
                node.parent.right = made

        logger.info(
            f"{self.strategy} partitioner produced {len(partitions)} partitions "
            f"({self.corrections} weight corrections, {self.relaxed} relaxed splits)"
        )
        return PartitionScheme(
            partitions=partitions,
            d=self.sample.dims,
            disjoint=self.disjoint,
            aux=root,
            partitioner="rsgrove",
            strategy=self.strategy,
            block_size=self.cfg.block_size,
            max_capacity=self.cfg.max_capacity,
        )

    # ----- helpers -----

    @staticmethod
    def _total_of(weights: np.ndarray) -> float:
        total = weights.sum()
        return int(total) if np.issubdtype(weights.dtype, np.integer) else float(total)

    def _leaf(self, pid: int, idx: np.ndarray) -> Partition:
        self.assignment[idx] = pid
        m, M = self.cfg.bounds
        weight = self._total_of(self.weights[idx])
        slack = WEIGHT_TOLERANCE * M
        if self.strategy != "blackbox" and not m - slack <= weight <= M + slack and len(idx) > 1:
            raise GroveInternalError(f"partition {pid} has weight {weight} outside [{m}, {M}]")
        return Partition(
            id=pid,
            mbb=Envelope.of_points(self.points[idx]),
            expected_weight=float(math.fsum(self.weights[idx])),
            point_count=len(idx),
        )

    def _split(self, idx: np.ndarray):
        """Split a node or return None when it is a leaf."""
        m, M = self.cfg.bounds
        weights = self.weights[idx]
        total = self._total_of(weights)
        if total <= M * (1 + WEIGHT_TOLERANCE):
            return None
        if len(idx) == 1:
            logger.warning(f"Single point of weight {total} exceeds M={M}; kept as its own partition")
            return None
        if self.strategy == "blackbox":
            return self._split_blackbox(idx)
        return self._split_valid(idx, total)

    def _finish(self, idx: np.ndarray, order: np.ndarray, pts: np.ndarray, axis: int, k: int, constrained: bool):
        below = float(pts[k - 1, axis])
        above = float(pts[k, axis])
        coord = cut_coordinate(below, above, below)
        logger.debug(f"Split {len(idx)} points on axis {axis} at {coord} (k={k})")
        return axis, coord, idx[order[:k]], idx[order[k:]], constrained

    def _pick_axis(self, pts: np.ndarray, weights: np.ndarray, bounds: Sequence[float]) -> int:
        for min_side in bounds:
            try:
                return choose_split_axis(pts, weights, min_side)
            except NoSplitCandidateError:
                continue
        spread = pts.max(axis=0) - pts.min(axis=0)
        return int(np.argmax(spread))

    def _split_blackbox(self, idx: np.ndarray):
        M = self.cfg.max_capacity
        n = len(idx)
        m_eff = max(1, math.floor(BLACKBOX_MIN_FRACTION * M))
        lower = max(m_eff, self.cfg.rho * n)
        pts = self.points[idx]
        ones = np.ones(n)
        axis = self._pick_axis(pts, ones, (lower, m_eff, 1))
        order = np.argsort(pts[:, axis], kind="stable")
        pts = pts[order]
        distinct = _distinct_boundary(pts, axis)
        left, right = _side_weights(ones)
        for bound, constrained in ((lower, True), (m_eff, False), (1, False)):
            ok = (left >= bound) & (right >= bound)
            for mask in (ok & distinct, ok):
                k = _best_candidate(pts, np.flatnonzero(mask) + 1)
                if k > 0:
                    return self._finish(idx, order, pts, axis, k, constrained)
        raise GroveInternalError(f"no split found for {n} points")

    def _split_valid(self, idx: np.ndarray, total: float):
        m, M = self.cfg.bounds
        rho = self.cfg.rho
        lower = max(m, rho * total)
        pts = self.points[idx]
        weights = self.weights[idx]
        axis = self._pick_axis(pts, weights, (lower, m))
        order, pts, w = _sorted_along(pts, weights, axis)
        distinct = _distinct_boundary(pts, axis)

        attempts = ((lower, distinct, True), (m, distinct, False), (m, None, False))
        for bound, mask, constrained in attempts:
            ks = _valid_candidates(w, m, M, bound, mask)
            k = _best_candidate(pts, ks)
            if k > 0:
                if not constrained and lower > m:
                    self.relaxed += 1
                    logger.debug(f"Relaxed the splitting ratio for a node of weight {total}")
                return self._finish(idx, order, pts, axis, k, constrained and rho > 0)

        if not np.issubdtype(w.dtype, np.floating):
            raise GroveInternalError(f"no valid split for a valid count {total} in [{m}, {M}]")

        ranges = enumerate_valid_ranges(total, m, M)
        positions = np.cumsum(w)
        empty = [
            (start, end) for start, end in ranges
            if not np.any((positions[:-1] >= start) & (positions[:-1] <= end))
        ]
        corrected = correct_weights(positions, w, empty)
        self.corrections += 1
        logger.warning(f"Corrected weights of a node with total {total} ({len(empty)} empty valid ranges)")
        self.weights[idx[order]] = corrected
        k = _best_candidate(pts, _valid_candidates(corrected, m, M, m))
        if k < 0:
            raise GroveInternalError(f"no valid split after weight correction of total {total}")
        return self._finish(idx, order, pts, axis, k, False)


def grove_partition(
    sample: WeightedSample,
    cfg: CapacityConfig,
    strategy: str = "grove",
    disjoint: bool = True,
) -> PartitionScheme:
    """
    Compute partition boundaries and the aux tree for a sample.

    Args:
        sample: Sample points (weighted when cfg.weighted)
        cfg: Capacity from compute_capacity
        strategy: blackbox, graybox or grove
        disjoint: Mode recorded in the scheme for the assign stage

    Returns:
        PartitionScheme with dense ids in depth-first, left-first order

    Raises:
        InvalidPartitionSizeError: If the sample total is not valid for [m, M]
    """
    return GrovePartitioner(sample, cfg, strategy, disjoint).run()
