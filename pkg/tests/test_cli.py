import csv
import io
import json

import numpy as np
import pytest

from oracles import random_boxes
from rsgrove.assign_service import MASTER_FILE, SCHEME_FILE, load_manifest
from rsgrove.datagen import format_coordinates
from rsgrove.ingest_service import WeightedSample
from rsgrove.main import EXIT_DATA, EXIT_OK, EXIT_USAGE, main
from rsgrove.scheme import PartitionScheme


def _pipeline(tmp_path, tag: str, block_size: int = 0):
    """generate -> sample -> partition -> assign; returns (block size, partition dir)."""
    data = tmp_path / "points.csv"
    if not data.exists():
        assert main(["generate", "--count", "3000", "--seed", "5", "--output", str(data)]) == EXIT_OK
    block = block_size or data.stat().st_size // 8
    common = ["--block-size", str(block), "--alpha", "0.6", "--seed", "1"]
    sample, hist, scheme = (tmp_path / f"{tag}-{name}" for name in ("sample.json", "hist.json", "scheme.json"))
    parts = tmp_path / f"{tag}-parts"
    assert main(["sample", "--input", str(data), "--sample", str(sample), "--histogram", str(hist),
                 "--sample-ratio", "0.5", *common]) == EXIT_OK
    assert main(["partition", "--sample", str(sample), "--histogram", str(hist),
                 "--output", str(scheme), *common]) == EXIT_OK
    assert main(["assign", "--input", str(data), "--scheme", str(scheme),
                 "--output-dir", str(parts), *common]) == EXIT_OK
    return block, parts


def test_full_pipeline(tmp_path, capsys):
    block, parts = _pipeline(tmp_path, "run")
    assert (parts / MASTER_FILE).is_file()
    assert (parts / SCHEME_FILE).is_file()

    report_path = tmp_path / "report.json"
    assert main(["metrics", "--manifest", str(parts), "--format", "json",
                 "--block-size", str(block), "--output", str(report_path)]) == EXIT_OK
    report = json.loads(report_path.read_text(encoding="utf-8"))
    assert report["partition_count"] >= 2
    assert 0.0 < report["q4_block_utilization"] <= 1.0

    capsys.readouterr()
    assert main(["metrics", "--manifest", str(parts / MASTER_FILE), "--format", "csv",
                 "--block-size", str(block)]) == EXIT_OK
    rows = list(csv.DictReader(io.StringIO(capsys.readouterr().out)))
    assert rows[0]["name"] == MASTER_FILE
    assert float(rows[0]["q4_block_utilization_norm"]) == 1.0

    queries = tmp_path / "queries.csv"
    assert main(["rangequery", "--partitions", str(parts), "--queries", "10", "--seed", "2",
                 "--output", str(queries)]) == EXIT_OK
    lines = queries.read_text(encoding="utf-8").splitlines()
    assert lines[0] == "id,blocks,matches,micros"
    assert len(lines) == 11

    join = tmp_path / "join.csv"
    assert main(["sjoin", "--left", str(parts), "--right", str(parts), "--threads", "2",
                 "--output", str(join)]) == EXIT_OK
    row = next(csv.DictReader(io.StringIO(join.read_text(encoding="utf-8"))))
    assert int(row["pair_count"]) == 3000


def test_same_seed_same_output(tmp_path):
    block, first = _pipeline(tmp_path, "first")
    _, second = _pipeline(tmp_path, "second", block)
    assert (first / SCHEME_FILE).read_bytes() == (second / SCHEME_FILE).read_bytes()
    assert (first / MASTER_FILE).read_bytes() == (second / MASTER_FILE).read_bytes()
    assert (tmp_path / "first-sample.json").read_bytes() == (tmp_path / "second-sample.json").read_bytes()


def test_sweep(tmp_path):
    out = tmp_path / "sweep.csv"
    code = main([
        "sweep", "--dataset", "uniform", "--count", "2000", "--seed", "3",
        "--block-size", "4000", "--alpha", "0.6", "--ratios", "0.5",
        "--partitioners", "rsgrove,str", "--queries", "5", "--output", str(out),
    ])
    assert code == EXIT_OK
    rows = list(csv.DictReader(io.StringIO(out.read_text(encoding="utf-8"))))
    assert [(r["partitioner"], r["strategy"]) for r in rows] == [("rsgrove", "grove"), ("str", "-")]
    assert "q1_total_volume_norm" in rows[0]


def test_sweep_over_split_ratios(tmp_path):
    out = tmp_path / "sweep.csv"
    code = main([
        "sweep", "--dataset", "uniform", "--count", "2000", "--seed", "3",
        "--block-size", "4000", "--alpha", "0.6", "--ratios", "0.5", "--strategies", "graybox",
        "--partitioners", "rsgrove,str", "--rhos", "0.1,0.4", "--queries", "0", "--output", str(out),
    ])
    assert code == EXIT_OK
    rows = list(csv.DictReader(io.StringIO(out.read_text(encoding="utf-8"))))
    assert [(r["partitioner"], r["rho"]) for r in rows] == [("rsgrove", "0.1"), ("rsgrove", "0.4"), ("str", "-")]


def test_sweep_requires_seed(tmp_path, capsys):
    code = main(["sweep", "--dataset", "uniform", "--count", "100", "--output", str(tmp_path / "s.csv")])
    assert code == EXIT_USAGE
    assert "rsgrove: usage:" in capsys.readouterr().err


@pytest.mark.parametrize(
    "argv",
    [
        [],
        ["explode"],
        ["partition", "--sample", "s.json"],
        ["sweep", "--dataset", "uniform", "--seed", "1", "--partitioners", "quadtree"],
        ["generate", "--count", "10", "--output", "x.csv", "--alpha", "1.5"],
        ["generate", "--count", "10", "--output", "x.csv", "--config", "absent.conf"],
    ],
)
def test_usage_errors(argv, capsys):
    assert main(argv) == EXIT_USAGE
    assert capsys.readouterr().err.startswith("rsgrove: usage:")


def test_empty_input_is_a_data_error(tmp_path, capsys):
    empty = tmp_path / "empty.csv"
    empty.write_text("", encoding="utf-8")
    code = main(["sample", "--input", str(empty), "--sample", str(tmp_path / "s.json")])
    assert code == EXIT_DATA
    assert "rsgrove: data error:" in capsys.readouterr().err


def test_missing_files_are_data_errors(tmp_path):
    assert main(["sample", "--input", str(tmp_path / "absent.csv"),
                 "--sample", str(tmp_path / "s.json")]) == EXIT_DATA
    data = tmp_path / "points.csv"
    data.write_text("0.1,0.2\n", encoding="utf-8")
    assert main(["assign", "--input", str(data), "--scheme", str(tmp_path / "absent.json"),
                 "--output-dir", str(tmp_path / "parts")]) == EXIT_DATA
    assert main(["metrics", "--manifest", str(tmp_path / "nowhere")]) == EXIT_DATA


def test_unknown_config_key_is_a_usage_error(tmp_path, capsys):
    config = tmp_path / "grove.conf"
    config.write_text("alhpa=0.5\n", encoding="utf-8")
    code = main(["generate", "--count", "10", "--output", str(tmp_path / "x.csv"), "--config", str(config)])
    assert code == EXIT_USAGE
    assert "alhpa" in capsys.readouterr().err


def test_sample_of_generated_data_spans_the_domain(tmp_path):
    data, sample = tmp_path / "diagonal.csv", tmp_path / "sample.json"
    assert main(["generate", "--kind", "diagonal", "--count", "20000", "--output", str(data)]) == EXIT_OK
    assert main(["sample", "--input", str(data), "--sample", str(sample), "--sample-ratio", "0.05"]) == EXIT_OK
    xs = WeightedSample.load(sample).points[:, 0]
    assert xs.max() > 0.9
    assert xs.min() < 0.1
    assert abs(xs.mean() - 0.5) < 0.05


def test_assign_mode_overrides_the_scheme(tmp_path):
    boxes = random_boxes(np.random.default_rng(8), 2000, max_side=0.1)
    data = tmp_path / "boxes.csv"
    data.write_text("".join(format_coordinates(row) + "\n" for row in boxes), encoding="utf-8")
    common = ["--schema", "envelope", "--block-size", str(data.stat().st_size // 8), "--alpha", "0.6"]
    sample, scheme = tmp_path / "sample.json", tmp_path / "scheme.json"
    assert main(["sample", "--input", str(data), "--sample", str(sample), "--sample-ratio", "0.5", *common]) == EXIT_OK
    assert main(["partition", "--sample", str(sample), "--output", str(scheme), *common]) == EXIT_OK

    replicated, once = tmp_path / "replicated", tmp_path / "once"
    assert main(["assign", "--input", str(data), "--scheme", str(scheme),
                 "--output-dir", str(replicated), *common]) == EXIT_OK
    assert main(["assign", "--input", str(data), "--scheme", str(scheme),
                 "--output-dir", str(once), "--mode", "overlap", *common]) == EXIT_OK

    assert sum(s.record_count for s in load_manifest(replicated)) > 2000
    assert sum(s.record_count for s in load_manifest(once)) == 2000
    assert PartitionScheme.load(once / SCHEME_FILE).mode == "overlap"
    assert PartitionScheme.load(replicated / SCHEME_FILE).mode == "disjoint"
