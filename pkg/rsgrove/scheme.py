"""
Partition scheme: partition boundaries plus the structure that routes
records to them.

R*-style, STR and Kd-tree schemes route through a k-d style aux tree of
split hyperplanes whose cells tile the whole space. Curve schemes route
through a table of key ranges instead.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Dict, List, Optional, Tuple, Union
import logging
import math

import numpy as np

from rsgrove.errors import SchemeFormatError
from rsgrove.geometry import Envelope
from rsgrove.schemas import (
    AuxNodeDocument,
    KeyRangeDocument,
    PartitionDocument,
    SchemeDocument,
)

logger = logging.getLogger(__name__)


# ========== Aux tree ==========

@dataclass
class AuxLeaf:
    leaf_id: int


@dataclass
class AuxSplit:
    """
    Split hyperplane x[axis] = coord.

    The left child holds x[axis] < coord, the right child x[axis] >= coord.
    """

    axis: int
    coord: float
    left: Optional["AuxNode"] = None
    right: Optional["AuxNode"] = None


AuxNode = Union[AuxSplit, AuxLeaf]


def aux_to_document(root: AuxNode) -> AuxNodeDocument:
    if isinstance(root, AuxLeaf):
        return AuxNodeDocument(leaf_id=root.leaf_id)
    return AuxNodeDocument(
        axis=root.axis,
        coord=root.coord,
        left=aux_to_document(root.left),
        right=aux_to_document(root.right),
    )


def aux_from_document(doc: AuxNodeDocument) -> AuxNode:
    if doc.leaf_id is not None:
        return AuxLeaf(doc.leaf_id)
    return AuxSplit(
        axis=doc.axis,
        coord=doc.coord,
        left=aux_from_document(doc.left),
        right=aux_from_document(doc.right),
    )


def aux_leaf_ids(root: AuxNode) -> List[int]:
    """Leaf ids in left-to-right order."""
    ids: List[int] = []
    stack: List[AuxNode] = [root]
    while stack:
        node = stack.pop()
        if isinstance(node, AuxLeaf):
            ids.append(node.leaf_id)
        else:
            stack.append(node.right)
            stack.append(node.left)
    return ids


def aux_cells(root: AuxNode, d: int) -> Dict[int, Envelope]:
    """
    Closed region of every aux leaf, outermost bounds +-inf.

    The left cell of a split is really half-open at coord; the closed
    envelope is what clipping and reference-point checks use.
    """
    cells: Dict[int, Envelope] = {}
    stack: List[Tuple[AuxNode, Tuple[float, ...], Tuple[float, ...]]] = [
        (root, (-math.inf,) * d, (math.inf,) * d)
    ]
    while stack:
        node, lo, hi = stack.pop()
        if isinstance(node, AuxLeaf):
            cells[node.leaf_id] = Envelope(lo, hi)
            continue
        k = node.axis
        c = min(max(node.coord, lo[k]), hi[k])
        left_hi = hi[:k] + (c,) + hi[k + 1:]
        right_lo = lo[:k] + (c,) + lo[k + 1:]
        stack.append((node.left, lo, left_hi))
        stack.append((node.right, right_lo, hi))
    return cells


# ========== Key ranges ==========

@dataclass(frozen=True)
class KeyRanges:
    """
    Space-filling-curve routing table.

    Run i holds keys in [lower_keys[i], lower_keys[i + 1]); lower_keys[0] is 0.
    """

    curve: str
    bits: int
    domain: Envelope
    lower_keys: Tuple[int, ...]

    def route_keys(self, keys: np.ndarray) -> np.ndarray:
        bounds = np.asarray(self.lower_keys, dtype=np.uint64)
        runs = np.searchsorted(bounds, np.asarray(keys, dtype=np.uint64), side="right") - 1
        return np.clip(runs, 0, len(bounds) - 1).astype(np.int64)


# ========== Scheme ==========

@dataclass(frozen=True)
class Partition:
    """
    One partition of the scheme.

    Attributes:
        id: Dense partition id
        mbb: Tight envelope of the member sample points, None if empty
        expected_weight: Total sample weight (bytes or point count)
        point_count: Sample points inside the partition
    """

    id: int
    mbb: Optional[Envelope]
    expected_weight: float
    point_count: int = 0


@dataclass
class PartitionScheme:
    """
    Final partition boundaries plus their routing structure.

    Exactly one of `aux` and `key_ranges` is set. `disjoint` selects
    replication through aux cells over ChooseLeaf on partition MBRs.
    """

    partitions: List[Partition]
    d: int
    disjoint: bool = True
    aux: Optional[AuxNode] = None
    key_ranges: Optional[KeyRanges] = None
    partitioner: str = "rsgrove"
    strategy: Optional[str] = None
    block_size: Optional[int] = None
    max_capacity: Optional[float] = None
    _cells: Optional[Dict[int, Envelope]] = field(default=None, init=False, repr=False, compare=False)

    def __post_init__(self) -> None:
        if (self.aux is None) == (self.key_ranges is None):
            raise ValueError("a scheme needs exactly one of aux or key_ranges")
        ids = [p.id for p in self.partitions]
        if ids != list(range(len(ids))):
            raise ValueError("partition ids must be dense 0..n-1 in order")
        if self.aux is not None and sorted(aux_leaf_ids(self.aux)) != ids:
            raise ValueError("aux leaves do not match partition ids")

    @property
    def size(self) -> int:
        return len(self.partitions)

    @property
    def mode(self) -> str:
        return "disjoint" if self.disjoint else "overlap"

    def with_mode(self, mode: Optional[str]) -> "PartitionScheme":
        """Copy of the scheme assigned in `mode` (None keeps the recorded one)."""
        if mode is None or mode == self.mode:
            return self
        if mode not in ("disjoint", "overlap"):
            raise ValueError(f"unknown mode {mode!r}")
        logger.info(f"Assigning {self.partitioner} scheme in {mode} mode instead of {self.mode}")
        return replace(self, disjoint=mode == "disjoint")

    @property
    def routes_by_key(self) -> bool:
        return self.key_ranges is not None

    def cells(self) -> Dict[int, Envelope]:
        """Aux cell of every partition (aux-routed schemes only)."""
        if self.aux is None:
            raise ValueError(f"{self.partitioner} scheme routes by curve key and has no cells")
        if self._cells is None:
            self._cells = aux_cells(self.aux, self.d)
        return self._cells

    def cell(self, pid: int) -> Envelope:
        return self.cells()[pid]

    # ----- serialization -----

    def to_document(self) -> SchemeDocument:
        partitions = [
            PartitionDocument(
                id=p.id,
                lo=list(p.mbb.lo) if p.mbb is not None else None,
                hi=list(p.mbb.hi) if p.mbb is not None else None,
                expected_weight=p.expected_weight,
                point_count=p.point_count,
            )
            for p in self.partitions
        ]
        key_ranges = None
        if self.key_ranges is not None:
            kr = self.key_ranges
            key_ranges = KeyRangeDocument(
                curve=kr.curve,
                bits=kr.bits,
                domain_lo=list(kr.domain.lo),
                domain_hi=list(kr.domain.hi),
                lower_keys=list(kr.lower_keys),
            )
        return SchemeDocument(
            d=self.d,
            mode=self.mode,
            partitioner=self.partitioner,
            strategy=self.strategy,
            block_size=self.block_size,
            max_capacity=self.max_capacity,
            partitions=partitions,
            aux=aux_to_document(self.aux) if self.aux is not None else None,
            key_ranges=key_ranges,
        )

    @classmethod
    def from_document(cls, doc: SchemeDocument) -> "PartitionScheme":
        partitions = []
        for p in doc.partitions:
            mbb = None
            if p.lo is not None and p.hi is not None:
                mbb = Envelope(tuple(p.lo), tuple(p.hi))
            partitions.append(Partition(p.id, mbb, p.expected_weight, p.point_count))
        key_ranges = None
        if doc.key_ranges is not None:
            kr = doc.key_ranges
            key_ranges = KeyRanges(
                curve=kr.curve,
                bits=kr.bits,
                domain=Envelope(tuple(kr.domain_lo), tuple(kr.domain_hi)),
                lower_keys=tuple(kr.lower_keys),
            )
        try:
            return cls(
                partitions=partitions,
                d=doc.d,
                disjoint=doc.mode == "disjoint",
                aux=aux_from_document(doc.aux) if doc.aux is not None else None,
                key_ranges=key_ranges,
                partitioner=doc.partitioner,
                strategy=doc.strategy,
                block_size=doc.block_size,
                max_capacity=doc.max_capacity,
            )
        except ValueError as e:
            raise SchemeFormatError(str(e))

    def to_json(self) -> str:
        return self.to_document().model_dump_json(indent=1)

    def save(self, path: Path) -> None:
        Path(path).write_text(self.to_json() + "\n", encoding="utf-8")
        logger.info(f"Wrote {self.partitioner} scheme with {self.size} partitions to {path}")

    @classmethod
    def load(cls, path: Path) -> "PartitionScheme":
        path = Path(path)
        if not path.is_file():
            raise SchemeFormatError(f"scheme file not found: {path}")
        try:
            doc = SchemeDocument.model_validate_json(path.read_text(encoding="utf-8"))
        except ValueError as e:
            raise SchemeFormatError(f"{path}: not a partition scheme: {e}")
        return cls.from_document(doc)


def cut_coordinate(below: Optional[float], above: Optional[float], fallback: float) -> float:
    """
    Split coordinate between the last value of a left group and the first
    value of a right group, so that `below` routes left and `above` right.

    Args:
        below: Largest coordinate on the left side, None if the side is empty
        above: Smallest coordinate on the right side, None if the side is empty
        fallback: Used when both sides are empty
    """
    if below is None and above is None:
        return fallback
    if below is None:
        return above
    if above is None:
        return float(np.nextafter(below, math.inf))
    if below >= above:
        return above
    mid = (below + above) / 2.0
    return above if mid <= below else mid
