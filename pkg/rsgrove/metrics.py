"""
Partition quality metrics over realized partition statistics.

    Q1  total volume        sum b_i * volume(mbb_i)
    Q2  total overlap       sum_{i<j} b_i * b_j * volume(mbb_i & mbb_j)
                            + sum b_i * (b_i - 1) / 2 * volume(mbb_i)
    Q3  total margin        sum b_i * margin(mbb_i)
    Q4  block utilization   sum size_i / (B * sum b_i)
    Q5  size deviation      population standard deviation of size_i

with b_i = ceil(size_i / B) blocks per partition.
"""

from __future__ import annotations

from typing import Dict, List, Sequence
import csv
import io
import logging
import math
import statistics

import numpy as np

from rsgrove.assign_service import PartitionStats
from rsgrove.errors import DataError
from rsgrove.schemas import QualityReport

logger = logging.getLogger(__name__)

METRIC_FIELDS = (
    "q1_total_volume",
    "q2_total_overlap",
    "q3_total_margin",
    "q4_block_utilization",
    "q5_size_stddev",
)


def block_count(size: int, block_size: int) -> int:
    """
    Blocks occupied by a partition of `size` bytes.

    Example:
        >>> block_count(100 * 2**20, 128 * 2**20), block_count(0, 128 * 2**20)
        (1, 0)
    """
    if block_size <= 0:
        raise ValueError(f"block size must be positive, got {block_size}")
    if size < 0:
        raise ValueError(f"size must be >= 0, got {size}")
    return -(-size // block_size)


def quality_report(stats: Sequence[PartitionStats], block_size: int) -> QualityReport:
    """
    Compute Q1-Q5.

    Empty partitions are dropped first. Q2 sums pair terms in (i, j) order
    with math.fsum so the report does not depend on floating-point
    accumulation order.

    Raises:
        DataError: If every partition is empty
    """
    kept = [s for s in stats if s.record_count > 0 and s.mbb is not None]
    if len(kept) < len(stats):
        logger.warning(f"Dropped {len(stats) - len(kept)} empty partitions before computing metrics")
    if not kept:
        raise DataError("every partition is empty; block utilization is undefined")

    blocks = np.asarray([block_count(s.size, block_size) for s in kept], dtype=np.float64)
    lo = np.asarray([s.mbb.lo for s in kept], dtype=np.float64)
    hi = np.asarray([s.mbb.hi for s in kept], dtype=np.float64)
    sides = hi - lo
    volumes = np.prod(sides, axis=1)
    margins = np.sum(sides, axis=1)

    q1 = math.fsum(blocks * volumes)
    q3 = math.fsum(blocks * margins)

    terms: List[float] = [float(t) for t in blocks * (blocks - 1) / 2.0 * volumes if t]
    for i in range(len(kept) - 1):
        inter = np.clip(np.minimum(hi[i], hi[i + 1:]) - np.maximum(lo[i], lo[i + 1:]), 0.0, None)
        pair = blocks[i] * blocks[i + 1:] * np.prod(inter, axis=1)
        terms.extend(float(t) for t in pair if t)
    q2 = math.fsum(terms)

    total_blocks = int(blocks.sum())
    sizes = [s.size for s in kept]
    q4 = sum(sizes) / (block_size * total_blocks) if total_blocks else 0.0
    q5 = statistics.pstdev(sizes) if len(sizes) > 1 else 0.0

    return QualityReport(
        q1_total_volume=q1,
        q2_total_overlap=q2,
        q3_total_margin=q3,
        q4_block_utilization=q4,
        q5_size_stddev=q5,
        partition_count=len(kept),
        total_blocks=total_blocks,
    )


# ========== Reporting ==========

def normalize_reports(reports: Dict[str, QualityReport]) -> Dict[str, Dict[str, float]]:
    """Divide every metric by its largest value across the reports (0 stays 0)."""
    normalized: Dict[str, Dict[str, float]] = {name: {} for name in reports}
    for field in METRIC_FIELDS:
        top = max((getattr(r, field) for r in reports.values()), default=0.0)
        for name, report in reports.items():
            value = getattr(report, field)
            normalized[name][field] = value / top if top > 0 else 0.0
    return normalized


def report_rows(reports: Dict[str, QualityReport]) -> List[Dict[str, object]]:
    """Flat rows with raw and normalized metrics, one per report."""
    normalized = normalize_reports(reports)
    rows = []
    for name, report in reports.items():
        row: Dict[str, object] = {"name": name}
        row.update(report.model_dump(exclude={"version"}))
        row.update({f"{field}_norm": normalized[name][field] for field in METRIC_FIELDS})
        rows.append(row)
    return rows


def render_table(reports: Dict[str, QualityReport]) -> str:
    """Aligned plain-text table of raw metrics."""
    header = ["name", "partitions", "blocks", "Q1", "Q2", "Q3", "Q4", "Q5"]
    body = [
        [
            name,
            str(r.partition_count),
            str(r.total_blocks),
            f"{r.q1_total_volume:.6g}",
            f"{r.q2_total_overlap:.6g}",
            f"{r.q3_total_margin:.6g}",
            f"{r.q4_block_utilization:.4f}",
            f"{r.q5_size_stddev:.6g}",
        ]
        for name, r in reports.items()
    ]
    widths = [max(len(row[i]) for row in [header] + body) for i in range(len(header))]
    lines = ["  ".join(cell.rjust(w) for cell, w in zip(row, widths)) for row in [header] + body]
    return "\n".join(lines)


def render_csv(rows: Sequence[Dict[str, object]]) -> str:
    if not rows:
        return ""
    buffer = io.StringIO()
    writer = csv.DictWriter(buffer, fieldnames=list(rows[0].keys()), lineterminator="\n")
    writer.writeheader()
    writer.writerows(rows)
    return buffer.getvalue()
