"""
Desk-scale benchmark: range queries and spatial joins over assigned
partition directories, plus the partitioner sweep.

Every partition directory holds part-<id> files, the _master manifest and
_scheme.json. Disjoint aux-routed schemes replicate straddling records,
so answers are deduplicated with the reference-point rule: a match is
reported only by the partition whose aux cell holds the lower corner of
the (query or pair) intersection.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple
import itertools
import logging
import math
import threading
import time

import numpy as np

from rsgrove.assign_service import (
    SCHEME_FILE,
    PartitionStats,
    assign_arrays,
    load_manifest,
    lookup_many,
    part_file_name,
)
from rsgrove.config import QUERY_STREAM, Settings, stream_rng
from rsgrove.errors import DataError, DimensionMismatchError, SchemeFormatError
from rsgrove.geometry import Envelope, volume
from rsgrove.ingest_service import (
    GridHistogram,
    WeightedSample,
    default_cells_per_dim,
    open_text,
    parse_record,
    sample_arrays,
)
from rsgrove.metrics import METRIC_FIELDS, block_count, normalize_reports, quality_report
from rsgrove.partition_service import build_scheme
from rsgrove.schemas import QualityReport, RecordSchema
from rsgrove.scheme import PartitionScheme

logger = logging.getLogger(__name__)

QUERY_FIELDS = ("id", "blocks", "matches", "micros")
JOIN_FIELDS = ("pair_count", "planned_pairs", "block_cost", "millis")


# ========== Queries ==========

@dataclass(frozen=True)
class RangeQuery:
    id: int
    box: Envelope


def gen_queries(domain: Envelope, count: int, area_fraction: float, seed: int) -> List[RangeQuery]:
    """
    Hypercube queries of volume area_fraction * volume(domain), placed
    uniformly so that each stays inside the domain.

    Raises:
        ValueError: If area_fraction is outside (0, 1) or the cube side
            exceeds a side of the domain

    Example:
        area_fraction=1e-4 over the unit square gives 0.01 x 0.01 boxes
    """
    if not 0.0 < area_fraction < 1.0:
        raise ValueError(f"area fraction must be in (0, 1), got {area_fraction}")
    if count < 0:
        raise ValueError(f"query count must be >= 0, got {count}")
    d = domain.dims
    lo = np.asarray(domain.lo)
    extent = np.asarray(domain.hi) - lo
    side = (area_fraction * volume(domain)) ** (1.0 / d)
    if np.any(side > extent):
        raise ValueError(f"query side {side} exceeds the domain extent {extent.tolist()}")
    corners = lo + stream_rng(seed, QUERY_STREAM).random((count, d)) * (extent - side)
    return [
        RangeQuery(i, Envelope(tuple(c.tolist()), tuple((c + side).tolist())))
        for i, c in enumerate(corners)
    ]


def range_query_cost(stats: Sequence[PartitionStats], query: RangeQuery, block_size: int) -> int:
    """Blocks of every partition whose MBR meets the query box."""
    return sum(
        block_count(s.size, block_size)
        for s in stats
        if s.mbb is not None and s.mbb.intersects(query.box)
    )


@dataclass
class QueryResult:
    id: int
    blocks: int
    matches: int
    micros: int
    records: Optional[List[str]] = field(default=None, repr=False)

    def as_row(self) -> Dict[str, int]:
        return {name: getattr(self, name) for name in QUERY_FIELDS}


# ========== Partition store ==========

@dataclass
class PartitionData:
    lo: np.ndarray
    hi: np.ndarray
    raw: List[str]


class PartitionStore:
    """
    Read access to one assigned partition directory.

    Partition files are parsed on first use and cached; loads are
    serialized so worker threads can share one store.
    """

    def __init__(self, part_dir: Path, schema: RecordSchema):
        self.part_dir = Path(part_dir)
        self.schema = schema
        self.scheme = PartitionScheme.load(self.part_dir / SCHEME_FILE)
        self.stats = load_manifest(self.part_dir)
        if len(self.stats) != self.scheme.size:
            raise SchemeFormatError(
                f"{self.part_dir}: manifest lists {len(self.stats)} partitions, scheme {self.scheme.size}"
            )
        self._cache: Dict[int, PartitionData] = {}
        self._lock = threading.Lock()

    @property
    def dedup(self) -> bool:
        """Whether records may be stored in several partitions."""
        return self.scheme.aux is not None and self.scheme.disjoint

    @property
    def dims(self) -> int:
        return self.scheme.d

    def load(self, pid: int) -> PartitionData:
        with self._lock:
            data = self._cache.get(pid)
            if data is None:
                data = self._read(pid)
                self._cache[pid] = data
            return data

    def _read(self, pid: int) -> PartitionData:
        path = self.part_dir / part_file_name(pid)
        if not path.is_file():
            raise SchemeFormatError(f"partition file missing: {path}")
        lo, hi, raw = [], [], []
        with open_text(path) as handle:
            for number, line in enumerate(handle, start=1):
                if not line.strip():
                    continue
                record = parse_record(line, self.schema, number)
                lo.append(record.envelope.lo)
                hi.append(record.envelope.hi)
                raw.append(record.raw)
        d = self.dims
        return PartitionData(
            lo=np.asarray(lo, dtype=np.float64).reshape(-1, d),
            hi=np.asarray(hi, dtype=np.float64).reshape(-1, d),
            raw=raw,
        )

    def owned(self, pid: int, refs: np.ndarray) -> np.ndarray:
        """Mask of reference points whose aux cell is partition pid."""
        if not self.dedup or len(refs) == 0:
            return np.ones(len(refs), dtype=bool)
        return lookup_many(self.scheme.aux, refs) == pid

    def block_size(self, override: Optional[int] = None) -> int:
        block = override if override is not None else self.scheme.block_size
        if not block:
            raise SchemeFormatError(f"{self.part_dir}: no block size recorded; pass one explicitly")
        return block


def _answer(store: PartitionStore, query: RangeQuery, block_size: int, collect: bool) -> QueryResult:
    start = time.perf_counter()
    qlo = np.asarray(query.box.lo)
    qhi = np.asarray(query.box.hi)
    blocks = 0
    matches = 0
    records: Optional[List[str]] = [] if collect else None

    for s in store.stats:
        if s.mbb is None or not s.mbb.intersects(query.box):
            continue
        blocks += block_count(s.size, block_size)
        if s.replicated == 0 and query.box.contains(s.mbb):
            matches += s.record_count
            if collect:
                records.extend(store.load(s.id).raw)
            continue
        data = store.load(s.id)
        hit = np.flatnonzero(np.all(data.lo <= qhi, axis=1) & np.all(data.hi >= qlo, axis=1))
        if hit.size and store.dedup:
            hit = hit[store.owned(s.id, np.maximum(data.lo[hit], qlo))]
        matches += int(hit.size)
        if collect:
            records.extend(data.raw[i] for i in hit)

    micros = int((time.perf_counter() - start) * 1e6)
    return QueryResult(query.id, blocks, matches, micros, records)


def run_range_queries(
    part_dir: Path,
    queries: Sequence[RangeQuery],
    schema: RecordSchema,
    block_size: Optional[int] = None,
    threads: int = 1,
    collect: bool = False,
) -> List[QueryResult]:
    """
    Answer a batch of range queries from an assigned partition directory.

    Partitions outside the query are skipped, partitions inside it that
    hold no replicated copies are counted in bulk, the rest are filtered
    record by record.

    Args:
        part_dir: Output directory of run_assignment
        queries: Query batch
        schema: Record layout of the partition files
        block_size: Block size for the cost column, defaults to the scheme's
        threads: Worker threads
        collect: Also return the matching raw lines per query

    Returns:
        One result per query, in query order
    """
    store = PartitionStore(part_dir, schema)
    block = store.block_size(block_size)
    with ThreadPoolExecutor(max_workers=max(1, threads)) as pool:
        results = list(pool.map(lambda q: _answer(store, q, block, collect), queries))
    total_blocks = sum(r.blocks for r in results)
    logger.info(f"Answered {len(results)} range queries over {store.scheme.size} partitions ({total_blocks} blocks)")
    return results


# ========== Spatial join ==========

@dataclass
class JoinPlan:
    """Overlapping partition pairs and the blocks reading them costs."""

    pairs: List[Tuple[int, int]]
    block_cost: int


@dataclass
class JoinResult:
    pair_count: int
    planned_pairs: int
    block_cost: int
    millis: int
    pairs: Optional[List[Tuple[str, str]]] = field(default=None, repr=False)

    def as_row(self) -> Dict[str, int]:
        return {name: getattr(self, name) for name in JOIN_FIELDS}


def _mbb_arrays(stats: Sequence[PartitionStats]) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    present = [s for s in stats if s.mbb is not None]
    ids = np.asarray([s.id for s in present], dtype=np.int64)
    lo = np.asarray([s.mbb.lo for s in present], dtype=np.float64)
    hi = np.asarray([s.mbb.hi for s in present], dtype=np.float64)
    return ids, lo, hi


def plan_join(
    stats_a: Sequence[PartitionStats],
    stats_b: Sequence[PartitionStats],
    block_size: int,
) -> JoinPlan:
    """
    Every pair of partitions whose MBRs intersect (touching included).

    block_cost sums b_i + b_j over the planned pairs.

    Raises:
        DimensionMismatchError: If the two sides differ in dimensionality
    """
    ids_a, lo_a, hi_a = _mbb_arrays(stats_a)
    ids_b, lo_b, hi_b = _mbb_arrays(stats_b)
    if len(ids_a) == 0 or len(ids_b) == 0:
        return JoinPlan([], 0)
    if lo_a.shape[1] != lo_b.shape[1]:
        raise DimensionMismatchError(f"cannot join {lo_a.shape[1]}-d and {lo_b.shape[1]}-d partitions")

    blocks_a = {s.id: block_count(s.size, block_size) for s in stats_a}
    blocks_b = {s.id: block_count(s.size, block_size) for s in stats_b}
    pairs: List[Tuple[int, int]] = []
    cost = 0
    for i, pid in enumerate(ids_a):
        meets = np.all(lo_b <= hi_a[i], axis=1) & np.all(hi_b >= lo_a[i], axis=1)
        for qid in ids_b[meets]:
            pairs.append((int(pid), int(qid)))
            cost += blocks_a[int(pid)] + blocks_b[int(qid)]
    return JoinPlan(pairs, cost)


def sweep_pairs(a: PartitionData, b: PartitionData) -> Tuple[np.ndarray, np.ndarray]:
    """
    Intersecting (a, b) record index pairs by a plane sweep on axis 0.

    Both sides are sorted by their lower x; whichever side has the smaller
    next lower x is scanned against the other side's entries that start
    before it ends.
    """
    na, nb = len(a.lo), len(b.lo)
    if na == 0 or nb == 0:
        empty = np.empty(0, dtype=np.int64)
        return empty, empty
    oa = np.argsort(a.lo[:, 0], kind="stable")
    ob = np.argsort(b.lo[:, 0], kind="stable")
    start_a, start_b = a.lo[oa, 0], b.lo[ob, 0]
    out_a: List[np.ndarray] = []
    out_b: List[np.ndarray] = []
    i = j = 0
    while i < na and j < nb:
        if start_a[i] <= start_b[j]:
            r = oa[i]
            end = np.searchsorted(start_b, a.hi[r, 0], side="right")
            cand = ob[j:end]
            ok = np.all(b.lo[cand] <= a.hi[r], axis=1) & np.all(b.hi[cand] >= a.lo[r], axis=1)
            out_b.append(cand[ok])
            out_a.append(np.full(int(ok.sum()), r, dtype=np.int64))
            i += 1
        else:
            s = ob[j]
            end = np.searchsorted(start_a, b.hi[s, 0], side="right")
            cand = oa[i:end]
            ok = np.all(a.lo[cand] <= b.hi[s], axis=1) & np.all(a.hi[cand] >= b.lo[s], axis=1)
            out_a.append(cand[ok])
            out_b.append(np.full(int(ok.sum()), s, dtype=np.int64))
            j += 1
    if not out_a:
        empty = np.empty(0, dtype=np.int64)
        return empty, empty
    return np.concatenate(out_a), np.concatenate(out_b)


def _join_pair(left: PartitionStore, right: PartitionStore, pair: Tuple[int, int], collect: bool):
    pid, qid = pair
    a = left.load(pid)
    b = right.load(qid)
    ia, ib = sweep_pairs(a, b)
    if ia.size:
        refs = np.maximum(a.lo[ia], b.lo[ib])
        keep = left.owned(pid, refs) & right.owned(qid, refs)
        ia, ib = ia[keep], ib[keep]
    found = [(a.raw[x], b.raw[y]) for x, y in zip(ia, ib)] if collect else None
    return int(ia.size), found


def spatial_join(
    dir_a: Path,
    dir_b: Path,
    schema: RecordSchema,
    plan: Optional[JoinPlan] = None,
    block_size: Optional[int] = None,
    threads: int = 1,
    collect: bool = False,
) -> JoinResult:
    """
    Join two assigned partition directories on envelope intersection.

    Args:
        dir_a: Left partition directory
        dir_b: Right partition directory
        schema: Record layout of both sides
        plan: Precomputed plan, built from both manifests when omitted
        block_size: Block size for the plan cost, defaults to the left scheme's
        threads: Worker threads; pairs run independently
        collect: Also return the matching raw line pairs

    Returns:
        JoinResult with the deduplicated record pair count

    Raises:
        DimensionMismatchError: If the two sides differ in dimensionality
    """
    start = time.perf_counter()
    left = PartitionStore(dir_a, schema)
    right = PartitionStore(dir_b, schema)
    if left.dims != right.dims:
        raise DimensionMismatchError(f"cannot join {left.dims}-d and {right.dims}-d partitions")
    if plan is None:
        plan = plan_join(left.stats, right.stats, left.block_size(block_size))

    with ThreadPoolExecutor(max_workers=max(1, threads)) as pool:
        outcomes = list(pool.map(lambda p: _join_pair(left, right, p, collect), plan.pairs))

    count = sum(n for n, _ in outcomes)
    found = [pair for _, pairs in outcomes for pair in pairs] if collect else None
    millis = int((time.perf_counter() - start) * 1000)
    logger.info(f"Joined {len(plan.pairs)} partition pairs into {count} record pairs in {millis} ms")
    return JoinResult(count, len(plan.pairs), plan.block_cost, millis, found)


# ========== Sweep ==========

def weighting_histogram(sample: WeightedSample, centers: np.ndarray, sizes: np.ndarray, settings: Settings) -> GridHistogram:
    """Histogram over the sample domain at the configured (or derived) resolution."""
    d = sample.dims
    cells = settings.grid_cells or default_cells_per_dim(-(-sample.total_input_size // settings.block_size), d)
    hist = GridHistogram.empty(sample.domain, [cells] * d)
    hist.add(centers, sizes)
    return hist


def run_sweep(
    lo: np.ndarray,
    hi: np.ndarray,
    sizes: np.ndarray,
    settings: Settings,
    partitioners: Sequence[str],
    ratios: Sequence[float],
    strategies: Sequence[str] = ("grove",),
    query_count: int = 100,
    rhos: Sequence[float] = (),
) -> List[Dict[str, object]]:
    """
    Partition one in-memory dataset under every configuration and report
    realized quality.

    Each (ratio, partitioner, strategy, rho) run samples with settings.seed,
    partitions, assigns the full data and computes Q1-Q5. Strategies and
    minimum split ratios (default settings.rho) only vary for the R*-style
    partitioner. Rows also carry the boundary computation time, the mean
    range-query block cost over `query_count` queries and every metric
    normalized to its largest value in the sweep.

    Returns:
        One row per run

    Raises:
        ValueError: If a minimum split ratio is outside [0, 0.5]
    """
    bad = [rho for rho in rhos if not 0.0 <= rho <= 0.5]
    if bad:
        raise ValueError(f"minimum split ratios must be in [0, 0.5], got {bad}")
    centers = (lo + hi) / 2.0
    domain = Envelope.of_points(np.concatenate([lo, hi]))
    queries = gen_queries(domain, query_count, settings.area_fraction, settings.seed) if query_count else []
    split_ratios = list(rhos) or [settings.rho]
    reports: Dict[str, QualityReport] = {}
    rows: List[Dict[str, object]] = []

    for ratio in ratios:
        sample = sample_arrays(centers, sizes, ratio, settings.seed)
        hist: Optional[GridHistogram] = None
        for name in partitioners:
            grove = name == "rsgrove"
            variants = itertools.product(strategies, split_ratios) if grove else [("-", "-")]
            for strategy, rho in variants:
                run = settings.model_copy(update={"partitioner": name, "sample_ratio": ratio})
                if grove:
                    run = run.model_copy(update={"strategy": strategy, "rho": rho})
                    if strategy == "grove" and hist is None:
                        hist = weighting_histogram(sample, centers, sizes, settings)
                started = time.perf_counter()
                scheme, _ = build_scheme(sample, run, hist if grove else None)
                seconds = time.perf_counter() - started
                stats = assign_arrays(scheme, lo, hi, sizes)
                try:
                    report = quality_report(stats, settings.block_size)
                except DataError as e:
                    logger.warning(f"Skipping {name}/{strategy}/rho={rho} at r={ratio}: {e}")
                    continue
                key = f"{name}/{strategy}/{rho}/{ratio}"
                reports[key] = report
                cost = (
                    sum(range_query_cost(stats, q, settings.block_size) for q in queries) / len(queries)
                    if queries else 0.0
                )
                row: Dict[str, object] = {
                    "partitioner": name,
                    "strategy": strategy,
                    "rho": rho,
                    "sample_ratio": ratio,
                    "partitions": scheme.size,
                    "boundary_seconds": round(seconds, 6),
                    "avg_query_blocks": cost,
                }
                row.update(report.model_dump(exclude={"version"}))
                rows.append(row)
                logger.info(f"Sweep run {key}: {scheme.size} partitions, Q4={report.q4_block_utilization:.3f}")

    normalized = normalize_reports(reports)
    for row, key in zip(rows, reports):
        row.update({f"{name}_norm": normalized[key][name] for name in METRIC_FIELDS})
    return rows


def mean_cost(results: Sequence[QueryResult]) -> float:
    return math.fsum(r.blocks for r in results) / len(results) if results else 0.0
