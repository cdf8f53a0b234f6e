"""
Phase 1 ingest: parse records, draw a Bernoulli sample, build the
uniform-grid storage-size histogram and spread its bytes over the sample.

Streaming functions take iterables of Record and read the input once.
Array counterparts (sample_arrays, GridHistogram.add) do the same work on
numpy arrays and consume the random stream identically, so a seed gives
the same sample either way.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path
from typing import IO, Iterable, Iterator, List, Optional, Sequence, Tuple
import gzip
import io
import logging
import math

import numpy as np

from rsgrove.config import SAMPLE_STREAM, stream_rng
from rsgrove.errors import (
    EmptyInputError,
    EmptySampleError,
    GroveInternalError,
    RecordParseError,
    SchemeFormatError,
)
from rsgrove.geometry import Envelope
from rsgrove.schemas import HistogramDocument, RecordSchema, SampleDocument

logger = logging.getLogger(__name__)

GZIP_MAGIC = b"\x1f\x8b"
UNIFORM_BATCH = 8192  # uniforms drawn per refill of the sampling stream
HISTOGRAM_BATCH = 65536
CONSERVATION_TOLERANCE = 1e-9


# ========== Records ==========

@dataclass(frozen=True)
class Record:
    """
    One input record.

    Attributes:
        envelope: Extent of the record (degenerate for points)
        payload_size: Bytes of the serialized line including its terminator
        raw: The line without its terminator, passed through to partition files
    """

    envelope: Envelope
    payload_size: int
    raw: str

    @property
    def center(self) -> Tuple[float, ...]:
        return self.envelope.center


def parse_record(line: str, schema: RecordSchema, line_number: Optional[int] = None) -> Record:
    """
    Parse one text line into a Record.

    Args:
        line: Input line, with or without trailing newline
        schema: Column layout
        line_number: Used in error messages only

    Returns:
        Record whose payload_size counts the UTF-8 bytes of the line plus "\\n"

    Raises:
        RecordParseError: If a coordinate field is missing or not numeric

    Example:
        >>> parse_record("1.0,2.0,freetext", RecordSchema()).payload_size
        17
    """
    text = line.rstrip("\r\n")
    payload_size = len(text.encode("utf-8")) + 1
    fields = text.split(schema.delimiter)
    try:
        values = [float(fields[c]) for c in schema.coordinate_columns]
    except IndexError:
        raise RecordParseError(
            f"expected {schema.field_count} coordinate fields, got {len(fields)}", line_number
        )
    except ValueError as e:
        raise RecordParseError(f"malformed numeric field: {e}", line_number)
    if not all(math.isfinite(v) for v in values):
        raise RecordParseError("non-finite coordinate", line_number)

    d = schema.dims
    if schema.kind == "point":
        envelope = Envelope.of_point(values)
    else:
        lo, hi = values[:d], values[d:]
        try:
            envelope = Envelope(tuple(lo), tuple(hi))
        except ValueError as e:
            raise RecordParseError(str(e), line_number)
    return Record(envelope=envelope, payload_size=payload_size, raw=text)


def open_text(path: Path) -> IO[str]:
    """Open a text file for reading, transparently decompressing gzip."""
    path = Path(path)
    with open(path, "rb") as head:
        magic = head.read(2)
    if magic == GZIP_MAGIC:
        return io.TextIOWrapper(gzip.open(path, "rb"), encoding="utf-8", newline="\n")
    return open(path, "r", encoding="utf-8", newline="\n")


class RecordReader:
    """
    Iterate the records of a text file, skipping malformed lines.

    Malformed lines are counted in `skipped` and never abort the scan.

    Example:
        reader = RecordReader(path, schema)
        for record in reader:
            ...
        print(reader.skipped)
    """

    def __init__(self, path: Path, schema: RecordSchema):
        self.path = Path(path)
        self.schema = schema
        self.skipped = 0
        self.read = 0

    def __iter__(self) -> Iterator[Record]:
        self.skipped = 0
        self.read = 0
        with open_text(self.path) as handle:
            for number, line in enumerate(handle, start=1):
                if not line.strip():
                    continue
                try:
                    record = parse_record(line, self.schema, number)
                except RecordParseError as e:
                    self.skipped += 1
                    logger.debug(f"Skipping {self.path}:{e}")
                    continue
                self.read += 1
                yield record
        if self.skipped:
            logger.warning(f"Skipped {self.skipped} malformed lines in {self.path}")


def read_arrays(records: Iterable[Record]) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """
    Load a record stream into arrays.

    Returns:
        (lo, hi, sizes): (n, d) corners and (n,) payload sizes in input order

    Raises:
        EmptyInputError: If the stream is empty
    """
    lo: List[Tuple[float, ...]] = []
    hi: List[Tuple[float, ...]] = []
    sizes: List[int] = []
    for record in records:
        lo.append(record.envelope.lo)
        hi.append(record.envelope.hi)
        sizes.append(record.payload_size)
    if not sizes:
        raise EmptyInputError("no records in input")
    return (
        np.asarray(lo, dtype=np.float64),
        np.asarray(hi, dtype=np.float64),
        np.asarray(sizes, dtype=np.int64),
    )


# ========== Sample ==========

@dataclass
class WeightedSample:
    """
    Sample points with per-point byte weights and totals over the full input.

    Attributes:
        points: (n, d) array of sample points (record centers)
        weights: (n,) weights; all 1.0 in record-count mode
        total_input_size: D, bytes over the whole input
        record_count: Records in the whole input
        domain: MBR of every record center in the input
        weighted: True once histogram weights were assigned
    """

    points: np.ndarray
    weights: np.ndarray
    total_input_size: int
    record_count: int
    domain: Envelope
    weighted: bool = False

    def __post_init__(self) -> None:
        self.points = np.asarray(self.points, dtype=np.float64)
        self.weights = np.asarray(self.weights, dtype=np.float64)
        if self.points.ndim != 2:
            raise ValueError("points must be an (n, d) array")
        if len(self.points) != len(self.weights):
            raise ValueError("points and weights must be parallel arrays")

    @classmethod
    def from_points(
        cls,
        points: np.ndarray,
        weights: Optional[np.ndarray] = None,
        total_input_size: Optional[int] = None,
        record_count: Optional[int] = None,
    ) -> "WeightedSample":
        """Wrap an in-memory point set, as if it were a full (r = 1) sample of unit-size records."""
        points = np.asarray(points, dtype=np.float64)
        if weights is None:
            weights = np.ones(len(points))
        return cls(
            points=points,
            weights=weights,
            total_input_size=len(points) if total_input_size is None else total_input_size,
            record_count=len(points) if record_count is None else record_count,
            domain=Envelope.of_points(points),
            weighted=False,
        )

    @property
    def size(self) -> int:
        return len(self.points)

    @property
    def dims(self) -> int:
        return self.points.shape[1]

    @property
    def total_weight(self) -> float:
        return math.fsum(self.weights)

    def to_document(self) -> SampleDocument:
        return SampleDocument(
            dims=self.dims,
            points=self.points.tolist(),
            weights=self.weights.tolist(),
            total_input_size=self.total_input_size,
            record_count=self.record_count,
            domain_lo=list(self.domain.lo),
            domain_hi=list(self.domain.hi),
            weighted=self.weighted,
        )

    @classmethod
    def from_document(cls, doc: SampleDocument) -> "WeightedSample":
        points = np.asarray(doc.points, dtype=np.float64).reshape(-1, doc.dims)
        return cls(
            points=points,
            weights=np.asarray(doc.weights, dtype=np.float64),
            total_input_size=doc.total_input_size,
            record_count=doc.record_count,
            domain=Envelope(tuple(doc.domain_lo), tuple(doc.domain_hi)),
            weighted=doc.weighted,
        )

    def save(self, path: Path) -> None:
        Path(path).write_text(self.to_document().model_dump_json(), encoding="utf-8")

    @classmethod
    def load(cls, path: Path) -> "WeightedSample":
        try:
            doc = SampleDocument.model_validate_json(Path(path).read_text(encoding="utf-8"))
        except ValueError as e:
            raise SchemeFormatError(f"{path}: not a sample document: {e}")
        return cls.from_document(doc)


class _UniformStream:
    """Batched draws from the sampling stream, consumed one value at a time."""

    def __init__(self, seed: int):
        self._rng = stream_rng(seed, SAMPLE_STREAM)
        self._buffer = np.empty(0)
        self._pos = 0

    def next(self) -> float:
        if self._pos == len(self._buffer):
            self._buffer = self._rng.random(UNIFORM_BATCH)
            self._pos = 0
        value = self._buffer[self._pos]
        self._pos += 1
        return value


def draw_sample(records: Iterable[Record], ratio: float, seed: int) -> WeightedSample:
    """
    Bernoulli-sample a record stream in a single pass.

    Each record is kept independently with probability `ratio` and turned
    into a point at its envelope center. D, the record count and the domain
    are accumulated over the FULL stream. Weights start at 1.

    Args:
        records: Record stream (read once)
        ratio: Sampling ratio r in (0, 1]
        seed: Seed of the Bernoulli draws

    Returns:
        WeightedSample in record-count mode

    Raises:
        ValueError: If ratio is outside (0, 1]
        EmptyInputError: If the stream is empty
        EmptySampleError: If no record was drawn
    """
    if not 0.0 < ratio <= 1.0:
        raise ValueError(f"sampling ratio must be in (0, 1], got {ratio}")

    uniforms = _UniformStream(seed)
    picked: List[Tuple[float, ...]] = []
    total_size = 0
    count = 0
    lo: Optional[List[float]] = None
    hi: Optional[List[float]] = None

    for record in records:
        center = record.center
        if lo is None:
            lo, hi = list(center), list(center)
        else:
            for k, c in enumerate(center):
                if c < lo[k]:
                    lo[k] = c
                elif c > hi[k]:
                    hi[k] = c
        total_size += record.payload_size
        count += 1
        if uniforms.next() < ratio:
            picked.append(center)

    if count == 0:
        raise EmptyInputError("no records in input")
    if not picked:
        raise EmptySampleError(
            f"sampling ratio {ratio} drew no points from {count} records; use a larger ratio"
        )

    logger.info(f"Sampled {len(picked)} of {count} records ({total_size} bytes) with r={ratio}")
    return WeightedSample(
        points=np.asarray(picked, dtype=np.float64),
        weights=np.ones(len(picked)),
        total_input_size=total_size,
        record_count=count,
        domain=Envelope(tuple(lo), tuple(hi)),
    )


def sample_arrays(centers: np.ndarray, sizes: np.ndarray, ratio: float, seed: int) -> WeightedSample:
    """
    Array counterpart of draw_sample: same seed, same picks.

    Args:
        centers: (n, d) record centers in input order
        sizes: (n,) payload sizes in bytes
        ratio: Sampling ratio r in (0, 1]
        seed: Seed of the Bernoulli draws
    """
    if not 0.0 < ratio <= 1.0:
        raise ValueError(f"sampling ratio must be in (0, 1], got {ratio}")
    centers = np.asarray(centers, dtype=np.float64)
    if len(centers) == 0:
        raise EmptyInputError("no records in input")
    mask = stream_rng(seed, SAMPLE_STREAM).random(len(centers)) < ratio
    if not mask.any():
        raise EmptySampleError(
            f"sampling ratio {ratio} drew no points from {len(centers)} records; use a larger ratio"
        )
    picked = centers[mask]
    return WeightedSample(
        points=picked,
        weights=np.ones(len(picked)),
        total_input_size=int(np.sum(sizes, dtype=np.int64)),
        record_count=len(centers),
        domain=Envelope.of_points(centers),
    )


def merge_samples(parts: Sequence[WeightedSample]) -> WeightedSample:
    """
    Combine samples drawn over disjoint input chunks.

    Parts are concatenated in the given (input) order so point indices do
    not depend on which chunk finished first.
    """
    if not parts:
        raise EmptySampleError("nothing to merge")
    domain = parts[0].domain
    for part in parts[1:]:
        domain = Envelope(
            tuple(min(a, b) for a, b in zip(domain.lo, part.domain.lo)),
            tuple(max(a, b) for a, b in zip(domain.hi, part.domain.hi)),
        )
    return WeightedSample(
        points=np.concatenate([p.points for p in parts]),
        weights=np.concatenate([p.weights for p in parts]),
        total_input_size=sum(p.total_input_size for p in parts),
        record_count=sum(p.record_count for p in parts),
        domain=domain,
        weighted=all(p.weighted for p in parts),
    )


# ========== Histogram ==========

def default_cells_per_dim(partitions: int, d: int) -> int:
    """Cells per dimension so the grid holds about 4x the desired partitions."""
    target = 4 * max(1, partitions)
    n = max(1, math.ceil(target ** (1.0 / d)))
    while n > 1 and (n - 1) ** d >= target:
        n -= 1
    while n ** d < target:
        n += 1
    return n


@dataclass
class GridHistogram:
    """
    Storage-size histogram over a uniform grid.

    Attributes:
        domain: Envelope covered by the grid
        cells_per_dim: Cells along each dimension
        cell_bytes: int64 array of shape cells_per_dim with byte totals
        clamped: Centers that fell outside the domain and were clamped

    A center on an interior cell boundary belongs to the higher-index cell;
    the upper face of the domain belongs to the last cell.
    """

    domain: Envelope
    cells_per_dim: Tuple[int, ...]
    cell_bytes: np.ndarray = field(repr=False)
    clamped: int = 0

    @classmethod
    def empty(cls, domain: Envelope, cells_per_dim: Sequence[int]) -> "GridHistogram":
        cells = tuple(int(n) for n in cells_per_dim)
        if len(cells) != domain.dims:
            raise ValueError(f"{len(cells)} cell counts for a {domain.dims}-d domain")
        if any(n < 1 for n in cells):
            raise ValueError(f"cells per dimension must be >= 1, got {cells}")
        return cls(domain=domain, cells_per_dim=cells, cell_bytes=np.zeros(cells, dtype=np.int64))

    @property
    def total(self) -> int:
        return int(self.cell_bytes.sum())

    def cell_index(self, points: np.ndarray) -> Tuple[np.ndarray, int]:
        """
        Flat (C-order) cell index of each point.

        Returns:
            (indices, number of points outside the domain that were clamped)
        """
        points = np.atleast_2d(np.asarray(points, dtype=np.float64))
        lo = np.asarray(self.domain.lo)
        hi = np.asarray(self.domain.hi)
        cells = np.asarray(self.cells_per_dim)
        extent = hi - lo
        outside = np.any((points < lo) | (points > hi), axis=1)
        with np.errstate(divide="ignore", invalid="ignore"):
            raw = np.floor((points - lo) / extent * cells)
        raw = np.where(extent > 0, raw, 0.0)
        idx = np.clip(raw, 0, cells - 1).astype(np.int64)
        flat = np.ravel_multi_index(tuple(idx.T), self.cells_per_dim)
        return flat, int(outside.sum())

    def add(self, centers: np.ndarray, sizes: np.ndarray) -> None:
        """Accumulate record sizes into the cells holding their centers."""
        flat, clamped = self.cell_index(centers)
        np.add.at(self.cell_bytes.reshape(-1), flat, np.asarray(sizes, dtype=np.int64))
        self.clamped += clamped

    def merge(self, other: "GridHistogram") -> "GridHistogram":
        """Cell-wise sum of two histograms over the same grid."""
        if other.domain != self.domain or other.cells_per_dim != self.cells_per_dim:
            raise ValueError("cannot merge histograms over different grids")
        return GridHistogram(
            domain=self.domain,
            cells_per_dim=self.cells_per_dim,
            cell_bytes=self.cell_bytes + other.cell_bytes,
            clamped=self.clamped + other.clamped,
        )

    def cell_centers(self, flat: np.ndarray) -> np.ndarray:
        idx = np.stack(np.unravel_index(flat, self.cells_per_dim), axis=1)
        lo = np.asarray(self.domain.lo)
        width = (np.asarray(self.domain.hi) - lo) / np.asarray(self.cells_per_dim)
        return lo + (idx + 0.5) * width

    def to_document(self) -> HistogramDocument:
        return HistogramDocument(
            domain_lo=list(self.domain.lo),
            domain_hi=list(self.domain.hi),
            cells_per_dim=list(self.cells_per_dim),
            cell_bytes=self.cell_bytes.reshape(-1).tolist(),
            clamped=self.clamped,
        )

    @classmethod
    def from_document(cls, doc: HistogramDocument) -> "GridHistogram":
        cells = tuple(doc.cells_per_dim)
        return cls(
            domain=Envelope(tuple(doc.domain_lo), tuple(doc.domain_hi)),
            cells_per_dim=cells,
            cell_bytes=np.asarray(doc.cell_bytes, dtype=np.int64).reshape(cells),
            clamped=doc.clamped,
        )

    def save(self, path: Path) -> None:
        Path(path).write_text(self.to_document().model_dump_json(), encoding="utf-8")

    @classmethod
    def load(cls, path: Path) -> "GridHistogram":
        try:
            doc = HistogramDocument.model_validate_json(Path(path).read_text(encoding="utf-8"))
        except ValueError as e:
            raise SchemeFormatError(f"{path}: not a histogram document: {e}")
        return cls.from_document(doc)


def build_histogram(
    records: Iterable[Record],
    domain: Envelope,
    cells_per_dim: Sequence[int],
) -> GridHistogram:
    """
    Sum record sizes per grid cell over the full input.

    Args:
        records: Record stream (read once)
        domain: Envelope expected to cover every record center
        cells_per_dim: Grid resolution per dimension

    Returns:
        GridHistogram whose cells sum to D exactly; centers outside the
        domain are clamped to the nearest boundary cell and counted
    """
    hist = GridHistogram.empty(domain, cells_per_dim)
    centers: List[Tuple[float, ...]] = []
    sizes: List[int] = []
    for record in records:
        centers.append(record.center)
        sizes.append(record.payload_size)
        if len(centers) == HISTOGRAM_BATCH:
            hist.add(np.asarray(centers), np.asarray(sizes))
            centers.clear()
            sizes.clear()
    if centers:
        hist.add(np.asarray(centers), np.asarray(sizes))
    if hist.clamped:
        logger.warning(f"Clamped {hist.clamped} record centers outside the histogram domain")
    logger.info(f"Built {'x'.join(map(str, hist.cells_per_dim))} histogram over {hist.total} bytes")
    return hist


def assign_weights(sample: WeightedSample, hist: GridHistogram) -> WeightedSample:
    """
    Spread each cell's bytes evenly over the sample points in that cell.

    Bytes of cells holding no sample point go to the sample point nearest
    to the cell center (Euclidean; ties to the lower point index), so the
    total weight W equals the histogram total D.

    Args:
        sample: Sample whose points lie in hist.domain
        hist: Storage-size histogram of the full input

    Returns:
        New WeightedSample with weighted=True

    Raises:
        EmptySampleError: If the sample has no points
        GroveInternalError: If the weights do not conserve the histogram total

    Example:
        A cell of 1000 bytes holding 5 sample points gives each point 200.
    """
    if sample.size == 0:
        raise EmptySampleError("cannot weight an empty sample")

    flat, _ = hist.cell_index(sample.points)
    cell_bytes = hist.cell_bytes.reshape(-1).astype(np.float64)
    counts = np.bincount(flat, minlength=cell_bytes.size)
    weights = cell_bytes[flat] / counts[flat]

    orphans = np.flatnonzero((counts == 0) & (cell_bytes > 0))
    if orphans.size:
        centers = hist.cell_centers(orphans)
        chunk = max(1, (1 << 22) // sample.size)
        for start in range(0, len(orphans), chunk):
            block = centers[start:start + chunk]
            dist = ((block[:, None, :] - sample.points[None, :, :]) ** 2).sum(axis=2)
            nearest = np.argmin(dist, axis=1)
            np.add.at(weights, nearest, cell_bytes[orphans[start:start + chunk]])
        logger.info(f"Reassigned bytes of {orphans.size} cells without sample points")

    if np.any(weights <= 0):
        raise GroveInternalError("sample point in a cell with no bytes; sample and histogram disagree")

    total = math.fsum(weights)
    expected = hist.total
    if abs(total - expected) > CONSERVATION_TOLERANCE * max(1, expected):
        raise GroveInternalError(f"weights sum to {total}, histogram holds {expected}")

    return WeightedSample(
        points=sample.points,
        weights=weights,
        total_input_size=sample.total_input_size,
        record_count=sample.record_count,
        domain=sample.domain,
        weighted=True,
    )
