"""
Phase 3: route every record to its partition file(s) and collect the
realized per-partition statistics.

Routing depends on the scheme:
    - aux tree, disjoint mode: every aux cell the record's envelope meets
      (records straddling a split are replicated)
    - aux tree, overlap mode: ChooseLeaf on the partition MBRs
    - key ranges: the curve run holding the key of the record's center
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path
from typing import Dict, Iterable, List, Optional, Sequence, Tuple
import logging

import numpy as np

from rsgrove.curves import route_by_key
from rsgrove.errors import GroveInternalError, SchemeFormatError
from rsgrove.geometry import Envelope, intersection, union
from rsgrove.ingest_service import Record
from rsgrove.schemas import ManifestEntry
from rsgrove.scheme import AuxLeaf, AuxNode, PartitionScheme

logger = logging.getLogger(__name__)

MASTER_FILE = "_master"
SCHEME_FILE = "_scheme.json"
WRITE_BUFFER_BYTES = 4 * 1024 * 1024
CHOOSE_LEAF_CHUNK = 1 << 20  # records x partitions per vectorized block


def part_file_name(pid: int) -> str:
    return f"part-{pid}"


# ========== Statistics ==========

@dataclass
class PartitionStats:
    """
    Realized statistics of one partition.

    Attributes:
        id: Partition id
        mbb: Envelope of everything stored (None while empty)
        size: Bytes stored, every replicated copy included
        record_count: Records stored, every replicated copy included
        replicated: Stored records whose envelope leaves the partition cell
    """

    id: int
    mbb: Optional[Envelope] = None
    size: int = 0
    record_count: int = 0
    replicated: int = 0

    def add(self, extent: Envelope, size: int, leaves_cell: bool = False) -> None:
        self.mbb = extent if self.mbb is None else union(self.mbb, extent)
        self.size += size
        self.record_count += 1
        if leaves_cell:
            self.replicated += 1

    def merge(self, other: "PartitionStats") -> "PartitionStats":
        """Field-wise sum, MBR union."""
        if other.id != self.id:
            raise ValueError(f"cannot merge stats of partitions {self.id} and {other.id}")
        if self.mbb is None:
            mbb = other.mbb
        elif other.mbb is None:
            mbb = self.mbb
        else:
            mbb = union(self.mbb, other.mbb)
        return PartitionStats(
            id=self.id,
            mbb=mbb,
            size=self.size + other.size,
            record_count=self.record_count + other.record_count,
            replicated=self.replicated + other.replicated,
        )

    def to_entry(self) -> ManifestEntry:
        return ManifestEntry(
            id=self.id,
            lo=list(self.mbb.lo) if self.mbb is not None else None,
            hi=list(self.mbb.hi) if self.mbb is not None else None,
            record_count=self.record_count,
            size=self.size,
            replicated=self.replicated,
        )

    @classmethod
    def from_entry(cls, entry: ManifestEntry) -> "PartitionStats":
        mbb = None
        if entry.lo is not None and entry.hi is not None:
            mbb = Envelope(tuple(entry.lo), tuple(entry.hi))
        return cls(entry.id, mbb, entry.size, entry.record_count, entry.replicated)


def write_manifest(stats: Sequence[PartitionStats], out_dir: Path) -> Path:
    path = Path(out_dir) / MASTER_FILE
    lines = [s.to_entry().model_dump_json() for s in sorted(stats, key=lambda s: s.id)]
    path.write_text("".join(line + "\n" for line in lines), encoding="utf-8")
    return path


def load_manifest(location: Path) -> List[PartitionStats]:
    """
    Read a _master manifest (or the partition directory holding one).

    Raises:
        SchemeFormatError: If the manifest is missing or malformed
    """
    path = Path(location)
    if path.is_dir():
        path = path / MASTER_FILE
    if not path.is_file():
        raise SchemeFormatError(f"manifest not found: {path}")
    stats = []
    for number, line in enumerate(path.read_text(encoding="utf-8").splitlines(), start=1):
        if not line.strip():
            continue
        try:
            stats.append(PartitionStats.from_entry(ManifestEntry.model_validate_json(line)))
        except ValueError as e:
            raise SchemeFormatError(f"{path}:{number}: bad manifest line: {e}")
    return stats


# ========== Routing primitives ==========

def lookup_point(aux: AuxNode, p: Sequence[float]) -> int:
    """
    Leaf id of the aux cell holding p.

    A coordinate equal to a split coordinate goes right.
    """
    node = aux
    while not isinstance(node, AuxLeaf):
        node = node.right if p[node.axis] >= node.coord else node.left
    return node.leaf_id


def lookup_many(aux: AuxNode, points: np.ndarray) -> np.ndarray:
    """Vectorized lookup_point over an (n, d) array."""
    points = np.atleast_2d(np.asarray(points, dtype=np.float64))
    result = np.full(len(points), -1, dtype=np.int64)
    stack: List[Tuple[AuxNode, np.ndarray]] = [(aux, np.arange(len(points)))]
    while stack:
        node, idx = stack.pop()
        if idx.size == 0:
            continue
        if isinstance(node, AuxLeaf):
            result[idx] = node.leaf_id
            continue
        right = points[idx, node.axis] >= node.coord
        stack.append((node.right, idx[right]))
        stack.append((node.left, idx[~right]))
    return result


def replicate(aux: AuxNode, e: Envelope) -> List[int]:
    """
    Ids of every aux cell the envelope meets, in ascending order.

    Cells are half-open at each split: the left side is x < coord, the
    right side x >= coord. An envelope touching a split from the left
    (hi == coord) therefore reaches the right cell too.
    """
    ids: List[int] = []
    stack: List[AuxNode] = [aux]
    while stack:
        node = stack.pop()
        if isinstance(node, AuxLeaf):
            ids.append(node.leaf_id)
            continue
        if e.lo[node.axis] < node.coord:
            stack.append(node.left)
        if e.hi[node.axis] >= node.coord:
            stack.append(node.right)
    return sorted(ids)


class _LeafChooser:
    """ChooseLeaf over the non-empty partition MBRs of a scheme."""

    def __init__(self, scheme: PartitionScheme):
        present = [p for p in scheme.partitions if p.mbb is not None]
        if not present:
            raise SchemeFormatError("scheme has no non-empty partition to choose from")
        self.ids = np.asarray([p.id for p in present], dtype=np.int64)
        self.lo = np.asarray([p.mbb.lo for p in present], dtype=np.float64)
        self.hi = np.asarray([p.mbb.hi for p in present], dtype=np.float64)
        self.volume = np.prod(self.hi - self.lo, axis=1)
        self.margin = np.sum(self.hi - self.lo, axis=1)

    def choose(self, lo: np.ndarray, hi: np.ndarray) -> np.ndarray:
        lo = np.atleast_2d(lo)
        hi = np.atleast_2d(hi)
        out = np.empty(len(lo), dtype=np.int64)
        step = max(1, CHOOSE_LEAF_CHUNK // len(self.ids))
        for start in range(0, len(lo), step):
            blo = lo[start:start + step, None, :]
            bhi = hi[start:start + step, None, :]
            side = np.maximum(self.hi, bhi) - np.minimum(self.lo, blo)
            dvol = np.prod(side, axis=2) - self.volume
            dmargin = np.sum(side, axis=2) - self.margin
            tied = dvol == dvol.min(axis=1, keepdims=True)
            dmargin = np.where(tied, dmargin, np.inf)
            best = dmargin == dmargin.min(axis=1, keepdims=True)
            out[start:start + step] = self.ids[np.argmax(best, axis=1)]
        return out


def choose_leaf(scheme: PartitionScheme, e: Envelope) -> int:
    """
    Partition whose MBR grows least in volume to absorb e; ties go to the
    smaller margin growth, then to the lower id.
    """
    chooser = _LeafChooser(scheme)
    return int(chooser.choose(np.asarray(e.lo), np.asarray(e.hi))[0])


class Router:
    """
    Routes envelopes under one scheme and reports what each partition stores.

    Example:
        router = Router(scheme)
        for pid in router.route(record.envelope):
            extent, leaves_cell = router.stored_extent(pid, record.envelope)
    """

    def __init__(self, scheme: PartitionScheme):
        self.scheme = scheme
        if scheme.routes_by_key:
            self.kind = "key"
        elif scheme.disjoint:
            self.kind = "replicate"
            self.cells = scheme.cells()
        else:
            self.kind = "choose_leaf"
            self.chooser = _LeafChooser(scheme)

    def route(self, e: Envelope) -> List[int]:
        if self.kind == "replicate":
            return replicate(self.scheme.aux, e)
        if self.kind == "key":
            return [int(route_by_key(self.scheme.key_ranges, [e.center])[0])]
        return [int(self.chooser.choose(np.asarray(e.lo), np.asarray(e.hi))[0])]

    def stored_extent(self, pid: int, e: Envelope) -> Tuple[Envelope, bool]:
        """
        Extent recorded for a copy of e in partition pid.

        Returns:
            (e clipped to the partition cell in disjoint mode, else e;
             whether e leaves the cell)
        """
        if self.kind != "replicate":
            return e, False
        cell = self.cells[pid]
        clipped = intersection(e, cell)
        if clipped is None:
            raise GroveInternalError(f"envelope {e} routed to partition {pid} it does not meet")
        return clipped, not cell.contains(e)

    def route_points(self, points: np.ndarray) -> np.ndarray:
        """One partition per point (points never straddle a split)."""
        points = np.atleast_2d(np.asarray(points, dtype=np.float64))
        if self.kind == "replicate":
            return lookup_many(self.scheme.aux, points)
        if self.kind == "key":
            return route_by_key(self.scheme.key_ranges, points)
        return self.chooser.choose(points, points)


# ========== Assignment ==========

class _PartitionWriter:
    """Buffered appends to one text file per partition."""

    def __init__(self, out_dir: Path, pids: Iterable[int]):
        self.out_dir = out_dir
        self.pids = list(pids)
        self.buffers: Dict[int, List[str]] = {}
        self.pending = 0

    def path(self, pid: int) -> Path:
        return self.out_dir / part_file_name(pid)

    def create(self) -> None:
        for pid in self.pids:
            self.path(pid).write_text("", encoding="utf-8")

    def write(self, pid: int, line: str) -> None:
        self.buffers.setdefault(pid, []).append(line)
        self.pending += len(line) + 1
        if self.pending >= WRITE_BUFFER_BYTES:
            self.flush()

    def flush(self) -> None:
        for pid, lines in self.buffers.items():
            with open(self.path(pid), "a", encoding="utf-8", newline="\n") as handle:
                handle.write("\n".join(lines) + "\n")
        self.buffers.clear()
        self.pending = 0

    def cleanup(self) -> None:
        for pid in self.pids:
            try:
                self.path(pid).unlink()
            except FileNotFoundError:
                pass
        for name in (MASTER_FILE, SCHEME_FILE):
            try:
                (self.out_dir / name).unlink()
            except FileNotFoundError:
                pass


def run_assignment(
    records: Iterable[Record],
    scheme: PartitionScheme,
    out_dir: Path,
    mode: Optional[str] = None,
) -> List[PartitionStats]:
    """
    Write every record to its partition file(s) and the _master manifest.

    The scheme is written to _scheme.json with the mode actually used, so
    queries over the directory deduplicate exactly when records were
    replicated.

    Args:
        records: Record stream (read once)
        scheme: Partition scheme
        out_dir: Directory for part-<id> files, _master and _scheme.json
        mode: disjoint (replicate through aux cells) or overlap (ChooseLeaf);
            None uses the mode recorded in the scheme

    Returns:
        Realized statistics per partition, in id order

    Raises:
        ValueError: If mode is not disjoint or overlap
        GroveInternalError: If a record cannot be routed
        OSError: On write failure, after removing the partial output
    """
    scheme = scheme.with_mode(mode)
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    router = Router(scheme)
    stats = [PartitionStats(p.id) for p in scheme.partitions]
    writer = _PartitionWriter(out, (p.id for p in scheme.partitions))
    records_in = 0
    try:
        writer.create()
        for record in records:
            records_in += 1
            pids = router.route(record.envelope)
            if not pids:
                raise GroveInternalError(f"record {record.raw!r} matched no partition")
            for pid in pids:
                extent, leaves = router.stored_extent(pid, record.envelope)
                stats[pid].add(extent, record.payload_size, leaves)
                writer.write(pid, record.raw)
        writer.flush()
        write_manifest(stats, out)
        scheme.save(out / SCHEME_FILE)
    except OSError as e:
        logger.error(f"Assignment to {out} failed: {e}; removing partial output")
        writer.cleanup()
        raise

    stored = sum(s.record_count for s in stats)
    logger.info(f"Assigned {records_in} records as {stored} stored copies into {scheme.size} partitions")
    return stats


def assign_arrays(
    scheme: PartitionScheme,
    lo: np.ndarray,
    hi: Optional[np.ndarray] = None,
    sizes: Optional[np.ndarray] = None,
    mode: Optional[str] = None,
) -> List[PartitionStats]:
    """
    In-memory assignment statistics for array data, no files written.

    Args:
        scheme: Partition scheme
        lo: (n, d) lower corners (the points themselves for point data)
        hi: (n, d) upper corners, defaults to lo
        sizes: (n,) record sizes in bytes, default 1
        mode: Assignment mode, None uses the scheme's

    Returns:
        Realized statistics per partition, identical to run_assignment's
    """
    lo = np.atleast_2d(np.asarray(lo, dtype=np.float64))
    hi = lo if hi is None else np.atleast_2d(np.asarray(hi, dtype=np.float64))
    sizes = np.ones(len(lo), dtype=np.int64) if sizes is None else np.asarray(sizes, dtype=np.int64)
    scheme = scheme.with_mode(mode)
    router = Router(scheme)
    n_parts = scheme.size

    if not np.array_equal(lo, hi):
        stats = [PartitionStats(p.id) for p in scheme.partitions]
        for i in range(len(lo)):
            e = Envelope(tuple(lo[i]), tuple(hi[i]))
            for pid in router.route(e):
                extent, leaves = router.stored_extent(pid, e)
                stats[pid].add(extent, int(sizes[i]), leaves)
        return stats

    if router.kind == "key":
        pids = route_by_key(scheme.key_ranges, (lo + hi) / 2.0)
    else:
        pids = router.route_points(lo)
    counts = np.bincount(pids, minlength=n_parts)
    totals = np.bincount(pids, weights=sizes, minlength=n_parts)
    d = lo.shape[1]
    mins = np.full((n_parts, d), np.inf)
    maxs = np.full((n_parts, d), -np.inf)
    np.minimum.at(mins, pids, lo)
    np.maximum.at(maxs, pids, hi)

    stats = []
    for pid in range(n_parts):
        mbb = None
        if counts[pid]:
            mbb = Envelope(tuple(float(v) for v in mins[pid]), tuple(float(v) for v in maxs[pid]))
        stats.append(PartitionStats(pid, mbb, int(round(totals[pid])), int(counts[pid])))
    return stats


def estimate_stats(scheme: PartitionScheme, block_size: Optional[int] = None) -> List[PartitionStats]:
    """
    Statistics predicted from the sample alone.

    Sizes are expected_weight * B / M, MBRs are the sample MBRs and record
    counts the sample point counts.

    Raises:
        SchemeFormatError: If the scheme does not record M or B
    """
    block = block_size if block_size is not None else scheme.block_size
    if block is None or not scheme.max_capacity:
        raise SchemeFormatError("scheme records no block size or capacity to estimate sizes from")
    scale = block / scheme.max_capacity
    return [
        PartitionStats(
            id=p.id,
            mbb=p.mbb,
            size=int(round(p.expected_weight * scale)),
            record_count=p.point_count,
        )
        for p in scheme.partitions
    ]
