"""
Pydantic schemas for every file the pipeline reads or writes.
Defines the on-disk contracts between the sample, partition, assign,
metrics and bench stages with automatic validation.

All documents carry a version stamp. Infinite bounds never appear:
empty partitions serialize lo/hi as null.
"""

from __future__ import annotations

from typing import List, Literal, Optional

from pydantic import BaseModel, ConfigDict, Field, model_validator

from rsgrove import FORMAT_VERSION


# ========== Input Schema ==========

class RecordSchema(BaseModel):
    """
    Column layout of newline-delimited input records.

    Example:
        {"kind": "point", "dims": 2, "delimiter": ",", "columns": [0, 1]}
        parses "1.0,2.0,freetext" as the point (1.0, 2.0)

        {"kind": "envelope", "dims": 2}
        parses "0,0,1,1" as lo=(0, 0), hi=(1, 1)
    """

    model_config = ConfigDict(frozen=True)

    kind: Literal["point", "envelope"] = "point"
    dims: int = Field(2, ge=1, description="Dimensionality d")
    delimiter: str = Field(",", min_length=1)
    columns: List[int] = Field(default_factory=list, description="Coordinate column indices")

    @model_validator(mode="after")
    def check_columns(self) -> "RecordSchema":
        if self.columns and len(self.columns) != self.field_count:
            raise ValueError(
                f"{self.kind} schema with d={self.dims} needs {self.field_count} columns, "
                f"got {len(self.columns)}"
            )
        if any(c < 0 for c in self.columns):
            raise ValueError("column indices must be >= 0")
        return self

    @property
    def field_count(self) -> int:
        return self.dims if self.kind == "point" else 2 * self.dims

    @property
    def coordinate_columns(self) -> List[int]:
        return list(self.columns) if self.columns else list(range(self.field_count))


# ========== Phase 1 Sidecars ==========

class HistogramDocument(BaseModel):
    """Uniform-grid storage-size histogram (flat cell array, C order)."""

    version: str = FORMAT_VERSION
    domain_lo: List[float]
    domain_hi: List[float]
    cells_per_dim: List[int]
    cell_bytes: List[int]
    clamped: int = 0

    @model_validator(mode="after")
    def check_shape(self) -> "HistogramDocument":
        expected = 1
        for n in self.cells_per_dim:
            expected *= n
        if len(self.cell_bytes) != expected:
            raise ValueError(f"expected {expected} cells, got {len(self.cell_bytes)}")
        return self


class SampleDocument(BaseModel):
    """Weighted sample with the global totals gathered over the full input."""

    version: str = FORMAT_VERSION
    dims: int
    points: List[List[float]]
    weights: List[float]
    total_input_size: int = Field(..., ge=0)
    record_count: int = Field(..., ge=0)
    domain_lo: List[float]
    domain_hi: List[float]
    weighted: bool = False

    @model_validator(mode="after")
    def check_parallel(self) -> "SampleDocument":
        if len(self.points) != len(self.weights):
            raise ValueError("points and weights must be parallel arrays")
        return self


# ========== Phase 2 Partition Scheme ==========

class AuxNodeDocument(BaseModel):
    """
    Node of the k-d style auxiliary search tree.

    Internal nodes carry {axis, coord, left, right}; leaves carry {leaf_id}.
    """

    axis: Optional[int] = None
    coord: Optional[float] = None
    left: Optional[AuxNodeDocument] = None
    right: Optional[AuxNodeDocument] = None
    leaf_id: Optional[int] = None

    @model_validator(mode="after")
    def check_kind(self) -> "AuxNodeDocument":
        is_leaf = self.leaf_id is not None
        is_split = None not in (self.axis, self.coord, self.left, self.right)
        if is_leaf == is_split:
            raise ValueError("aux node must be either a leaf or a split with two children")
        return self


class PartitionDocument(BaseModel):
    id: int = Field(..., ge=0)
    lo: Optional[List[float]] = None
    hi: Optional[List[float]] = None
    expected_weight: float = Field(0.0, ge=0.0)
    point_count: int = Field(0, ge=0, description="Sample points inside the partition")


class KeyRangeDocument(BaseModel):
    """Space-filling-curve routing table: run i starts at lower_keys[i]."""

    curve: Literal["z", "hilbert"]
    bits: int = Field(..., ge=1)
    domain_lo: List[float]
    domain_hi: List[float]
    lower_keys: List[int]


class SchemeDocument(BaseModel):
    """
    Partition scheme contract between the partition and assign stages.

    Example:
        {
            "version": "0.1.0", "d": 2, "mode": "disjoint", "partitioner": "rsgrove",
            "partitions": [{"id": 0, "lo": [0, 0], "hi": [4, 9], "expected_weight": 9.0}, ...],
            "aux": {"axis": 0, "coord": 4.5, "left": {"leaf_id": 0}, "right": {...}}
        }
    """

    version: str = FORMAT_VERSION
    d: int = Field(..., ge=1)
    mode: Literal["disjoint", "overlap"] = "disjoint"
    partitioner: str = "rsgrove"
    strategy: Optional[str] = None
    block_size: Optional[int] = None
    max_capacity: Optional[float] = None
    partitions: List[PartitionDocument]
    aux: Optional[AuxNodeDocument] = None
    key_ranges: Optional[KeyRangeDocument] = None

    @model_validator(mode="after")
    def check_routing(self) -> "SchemeDocument":
        if (self.aux is None) == (self.key_ranges is None):
            raise ValueError("scheme needs exactly one of aux or key_ranges")
        ids = [p.id for p in self.partitions]
        if ids != list(range(len(ids))):
            raise ValueError("partition ids must be dense 0..n-1 in order")
        return self


# ========== Phase 3 Manifest ==========

class ManifestEntry(BaseModel):
    """
    One line of the _master manifest.

    Example:
        {"version": "0.1.0", "id": 3, "lo": [0.1, 0.2], "hi": [0.3, 0.5],
         "record_count": 1042, "size": 20840, "replicated": 0}
    """

    version: str = FORMAT_VERSION
    id: int = Field(..., ge=0)
    lo: Optional[List[float]] = None
    hi: Optional[List[float]] = None
    record_count: int = Field(0, ge=0)
    size: int = Field(0, ge=0)
    replicated: int = Field(0, ge=0, description="Records whose envelope leaves the cell")


# ========== Quality Report ==========

class QualityReport(BaseModel):
    """
    Partition quality metrics Q1-Q5 over realized partitions.

    Example:
        {
            "q1_total_volume": 12.0, "q2_total_overlap": 6.0, "q3_total_margin": 12.0,
            "q4_block_utilization": 0.78125, "q5_size_stddev": 52428800.0,
            "partition_count": 2, "total_blocks": 3
        }
    """

    version: str = FORMAT_VERSION
    q1_total_volume: float = Field(..., ge=0.0)
    q2_total_overlap: float = Field(..., ge=0.0)
    q3_total_margin: float = Field(..., ge=0.0)
    q4_block_utilization: float = Field(..., gt=0.0, le=1.0)
    q5_size_stddev: float = Field(..., ge=0.0)
    partition_count: int = Field(..., ge=1)
    total_blocks: int = Field(..., ge=1)


AuxNodeDocument.model_rebuild()
