import csv
import io

import pytest
from hypothesis import given, strategies as st

from rsgrove.assign_service import PartitionStats
from rsgrove.errors import DataError
from rsgrove.geometry import Envelope
from rsgrove.metrics import (
    METRIC_FIELDS,
    block_count,
    normalize_reports,
    quality_report,
    render_csv,
    render_table,
    report_rows,
)

MIB = 2**20
BLOCK = 128 * MIB


def _two_partitions():
    return [
        PartitionStats(0, Envelope((0.0, 0.0), (2.0, 2.0)), 100 * MIB, 10),
        PartitionStats(1, Envelope((1.0, 1.0), (3.0, 3.0)), 200 * MIB, 20),
    ]


def test_block_count():
    assert block_count(100 * MIB, BLOCK) == 1
    assert block_count(BLOCK, BLOCK) == 1
    assert block_count(BLOCK + 1, BLOCK) == 2
    assert block_count(0, BLOCK) == 0
    with pytest.raises(ValueError):
        block_count(1, 0)
    with pytest.raises(ValueError):
        block_count(-1, BLOCK)


class TestQualityReport:
    def test_worked_example(self):
        report = quality_report(_two_partitions(), BLOCK)
        assert report.q1_total_volume == pytest.approx(12.0)
        assert report.q2_total_overlap == pytest.approx(6.0)
        assert report.q3_total_margin == pytest.approx(12.0)
        assert report.q4_block_utilization == pytest.approx(0.78125)
        assert report.q5_size_stddev == pytest.approx(50 * MIB)
        assert report.total_blocks == 3
        assert report.partition_count == 2

    def test_empty_partitions_are_dropped(self, caplog):
        stats = _two_partitions() + [PartitionStats(2)]
        with caplog.at_level("WARNING"):
            report = quality_report(stats, BLOCK)
        assert report.partition_count == 2
        assert report.q1_total_volume == pytest.approx(12.0)
        assert "Dropped 1 empty" in caplog.text

    def test_all_empty(self):
        with pytest.raises(DataError):
            quality_report([PartitionStats(0), PartitionStats(1)], BLOCK)

    def test_single_partition(self):
        report = quality_report([PartitionStats(0, Envelope((0.0,), (4.0,)), 3 * BLOCK, 5)], BLOCK)
        assert report.q5_size_stddev == 0.0
        assert report.q4_block_utilization == 1.0
        assert report.q2_total_overlap == pytest.approx(3.0 * 4.0)

    def test_disjoint_single_block_partitions_do_not_overlap(self):
        stats = [
            PartitionStats(0, Envelope((0.0, 0.0), (1.0, 1.0)), MIB, 1),
            PartitionStats(1, Envelope((1.0, 0.0), (2.0, 1.0)), MIB, 1),
        ]
        assert quality_report(stats, BLOCK).q2_total_overlap == 0.0

    def test_overlap_independent_of_order(self, rng):
        stats = []
        for pid in range(40):
            lo = rng.random(3)
            hi = lo + rng.random(3) * 0.5
            size = int(rng.integers(1, 5 * BLOCK))
            stats.append(PartitionStats(pid, Envelope(tuple(lo), tuple(hi)), size, 1))
        forward = quality_report(stats, BLOCK)
        shuffled = [stats[i] for i in rng.permutation(len(stats))]
        backward = quality_report(shuffled, BLOCK)
        assert forward.q2_total_overlap == backward.q2_total_overlap
        assert forward.q1_total_volume == backward.q1_total_volume


@given(st.lists(st.integers(min_value=1, max_value=10 * 1024), min_size=1, max_size=30))
def test_utilization_in_unit_interval(sizes):
    stats = [PartitionStats(i, Envelope((0.0,), (1.0,)), s, 1) for i, s in enumerate(sizes)]
    report = quality_report(stats, 1024)
    assert 0.0 < report.q4_block_utilization <= 1.0


# ========== Reporting ==========

def _reports():
    small = quality_report(_two_partitions()[:1], BLOCK)
    both = quality_report(_two_partitions(), BLOCK)
    return {"small": small, "both": both}


def test_normalize_divides_by_largest():
    normalized = normalize_reports(_reports())
    assert normalized["both"]["q1_total_volume"] == 1.0
    assert normalized["small"]["q1_total_volume"] == pytest.approx(4.0 / 12.0)
    assert normalized["small"]["q5_size_stddev"] == 0.0
    assert normalized["small"]["q2_total_overlap"] == 0.0
    assert all(0.0 <= v <= 1.0 for row in normalized.values() for v in row.values())


def test_report_rows_carry_raw_and_normalized():
    rows = report_rows(_reports())
    assert [row["name"] for row in rows] == ["small", "both"]
    assert "version" not in rows[0]
    for field in METRIC_FIELDS:
        assert field in rows[0]
        assert f"{field}_norm" in rows[0]


def test_render_csv():
    text = render_csv(report_rows(_reports()))
    parsed = list(csv.DictReader(io.StringIO(text)))
    assert len(parsed) == 2
    assert float(parsed[1]["q4_block_utilization"]) == pytest.approx(0.78125)
    assert render_csv([]) == ""


def test_render_table():
    lines = render_table(_reports()).splitlines()
    assert len(lines) == 3
    assert lines[0].split() == ["name", "partitions", "blocks", "Q1", "Q2", "Q3", "Q4", "Q5"]
    assert lines[2].split()[:3] == ["both", "2", "3"]
    assert "0.781" in lines[2]
