"""
Command-line entry point for the rsgrove pipeline.

Subcommands mirror the workflow: generate -> sample -> partition ->
assign -> metrics, plus the rangequery / sjoin / sweep benchmarks.
Every subcommand shares the run-configuration flags; flags override the
--config file, which overrides GROVE_* environment variables.

Exit codes: 0 success, 1 usage, 2 data error, 3 internal error.
"""

from __future__ import annotations

from pathlib import Path
from typing import Any, Callable, Dict, List, Optional, Sequence
import argparse
import logging
import sys

import numpy as np

from rsgrove import __version__
from rsgrove import datagen
from rsgrove.assign_service import load_manifest, run_assignment
from rsgrove.bench_service import (
    JOIN_FIELDS,
    QUERY_FIELDS,
    gen_queries,
    mean_cost,
    run_range_queries,
    run_sweep,
    spatial_join,
)
from rsgrove.config import PARTITIONERS, STRATEGIES, Settings, load_settings
from rsgrove.errors import DataError, GroveError, GroveInternalError
from rsgrove.geometry import Envelope
from rsgrove.ingest_service import (
    GridHistogram,
    RecordReader,
    WeightedSample,
    build_histogram,
    default_cells_per_dim,
    draw_sample,
    read_arrays,
)
from rsgrove.metrics import quality_report, render_csv, render_table, report_rows
from rsgrove.partition_service import build_scheme
from rsgrove.schemas import RecordSchema
from rsgrove.scheme import PartitionScheme

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DATA = 2
EXIT_INTERNAL = 3


class UsageError(Exception):
    """Bad command line."""


class _Parser(argparse.ArgumentParser):
    def error(self, message: str) -> None:  # type: ignore[override]
        raise UsageError(message)


# ========== Helpers ==========

def record_schema(settings: Settings) -> RecordSchema:
    return RecordSchema(
        kind=settings.schema_kind,
        dims=settings.dims,
        delimiter=settings.delimiter,
        columns=settings.columns,
    )


def _float_list(text: str) -> List[float]:
    return [float(part) for part in text.split(",") if part.strip()]


def _name_list(choices: Sequence[str]) -> Callable[[str], List[str]]:
    def parse(text: str) -> List[str]:
        names = [part.strip() for part in text.split(",") if part.strip()]
        unknown = [n for n in names if n not in choices]
        if unknown:
            raise argparse.ArgumentTypeError(f"unknown {unknown}, expected from {list(choices)}")
        return names

    return parse


def _emit(text: str, output: Optional[Path]) -> None:
    if output is None:
        sys.stdout.write(text if text.endswith("\n") else text + "\n")
    else:
        output.write_text(text if text.endswith("\n") else text + "\n", encoding="utf-8")
        logger.info(f"Wrote {output}")


def _csv(rows: List[Dict[str, Any]], fields: Sequence[str]) -> str:
    return render_csv([{name: row[name] for name in fields} for row in rows])


# ========== Subcommands ==========

def cmd_generate(args: argparse.Namespace, settings: Settings) -> int:
    lines = datagen.generate_lines(
        args.kind,
        args.count,
        settings.dims,
        settings.seed,
        perc=args.perc,
        buf=args.buf,
        min_bytes=args.min_bytes,
        max_bytes=args.max_bytes,
        skew=args.skew,
    )
    datagen.write_lines(args.output, lines)
    return EXIT_OK


def cmd_sample(args: argparse.Namespace, settings: Settings) -> int:
    schema = record_schema(settings)
    sample = draw_sample(RecordReader(args.input, schema), settings.sample_ratio, settings.seed)
    sample.save(args.sample)
    logger.info(f"Wrote sample of {sample.size} points to {args.sample}")
    if args.histogram is not None:
        partitions = -(-sample.total_input_size // settings.block_size)
        cells = settings.grid_cells or default_cells_per_dim(partitions, sample.dims)
        hist = build_histogram(RecordReader(args.input, schema), sample.domain, [cells] * sample.dims)
        hist.save(args.histogram)
    return EXIT_OK


def cmd_partition(args: argparse.Namespace, settings: Settings) -> int:
    sample = WeightedSample.load(args.sample)
    hist = GridHistogram.load(args.histogram) if args.histogram is not None else None
    scheme, cfg = build_scheme(sample, settings, hist)
    scheme.save(args.output)
    logger.info(f"Capacity m={cfg.min_capacity}, M={cfg.max_capacity}; {scheme.size} partitions")
    return EXIT_OK


def cmd_assign(args: argparse.Namespace, settings: Settings) -> int:
    scheme = PartitionScheme.load(args.scheme)
    reader = RecordReader(args.input, record_schema(settings))
    mode = settings.mode if "mode" in settings.model_fields_set else None
    run_assignment(reader, scheme, args.output_dir, mode)
    return EXIT_OK


def cmd_metrics(args: argparse.Namespace, settings: Settings) -> int:
    stats = load_manifest(args.manifest)
    report = quality_report(stats, settings.block_size)
    name = Path(args.manifest).name
    if args.format == "json":
        _emit(report.model_dump_json(indent=2), args.output)
    elif args.format == "csv":
        _emit(render_csv(report_rows({name: report})), args.output)
    else:
        _emit(render_table({name: report}), args.output)
    return EXIT_OK


def cmd_rangequery(args: argparse.Namespace, settings: Settings) -> int:
    stats = load_manifest(args.partitions)
    present = [s.mbb for s in stats if s.mbb is not None]
    if not present:
        raise DataError(f"{args.partitions} holds no records")
    domain = Envelope(
        tuple(np.min([e.lo for e in present], axis=0).tolist()),
        tuple(np.max([e.hi for e in present], axis=0).tolist()),
    )
    queries = gen_queries(domain, args.queries, settings.area_fraction, settings.seed)
    results = run_range_queries(
        args.partitions,
        queries,
        record_schema(settings),
        block_size=args.block_size,
        threads=settings.worker_threads,
    )
    logger.info(f"Mean query cost {mean_cost(results):.3f} blocks")
    _emit(_csv([r.as_row() for r in results], QUERY_FIELDS), args.output)
    return EXIT_OK


def cmd_sjoin(args: argparse.Namespace, settings: Settings) -> int:
    result = spatial_join(
        args.left,
        args.right,
        record_schema(settings),
        block_size=args.block_size,
        threads=settings.worker_threads,
    )
    _emit(_csv([result.as_row()], JOIN_FIELDS), args.output)
    return EXIT_OK


def cmd_sweep(args: argparse.Namespace, settings: Settings) -> int:
    if args.input is not None:
        lo, hi, sizes = read_arrays(RecordReader(args.input, record_schema(settings)))
    else:
        points, sizes = datagen.dataset_arrays(
            args.dataset,
            args.count,
            settings.dims,
            settings.seed,
            perc=args.perc,
            buf=args.buf,
            min_bytes=args.min_bytes,
            max_bytes=args.max_bytes,
            skew=args.skew,
        )
        lo = hi = points
    rows = run_sweep(
        lo,
        hi,
        sizes,
        settings,
        args.partitioners,
        args.ratios or [settings.sample_ratio],
        args.strategies or [settings.strategy],
        query_count=args.queries,
        rhos=args.rhos or [],
    )
    _emit(render_csv(rows), args.output)
    return EXIT_OK


# ========== Parser ==========

def _add_settings_flags(parser: argparse.ArgumentParser) -> None:
    group = parser.add_argument_group("run configuration")
    group.add_argument("--config", type=Path, help="Flat key=value configuration file")
    group.add_argument("--block-size", type=int, help="Block size B in bytes (default 134217728)")
    group.add_argument("--alpha", type=float, help="Balance factor m/M (default 0.95)")
    group.add_argument("--rho", type=float, help="Minimum splitting ratio (default 0.4)")
    group.add_argument("--sample-ratio", type=float, help="Bernoulli sampling ratio (default 0.01)")
    group.add_argument("--seed", type=int, help="Random seed (default 0)")
    group.add_argument("--partitioner", choices=PARTITIONERS, help="Partitioner (default rsgrove)")
    group.add_argument("--strategy", choices=STRATEGIES, help="R*-style strategy (default grove)")
    group.add_argument("--mode", choices=("disjoint", "overlap"), help="Assignment mode (default disjoint; assign defaults to the scheme's)")
    group.add_argument("--grid-cells", type=int, help="Histogram cells per dimension (0 derives it)")
    group.add_argument("--dims", type=int, help="Dimensionality d (default 2)")
    group.add_argument("--schema", choices=("point", "envelope"), help="Record schema (default point)")
    group.add_argument("--delimiter", help="Field delimiter (default ',')")
    group.add_argument("--columns", help="Coordinate column indices, e.g. 0,1")
    group.add_argument("--threads", type=int, help="Worker threads (0 = machine parallelism)")
    group.add_argument("--area-fraction", type=float, help="Range query volume fraction (default 1e-4)")
    group.add_argument("--log-level", help="Logging level (default INFO)")


def _add_dataset_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--perc", type=float, default=0.05, help="Diagonal: fraction exactly on the line")
    parser.add_argument("--buf", type=float, default=0.1, help="Diagonal: buffer width around the line")
    parser.add_argument("--min-bytes", type=int, default=64, help="Varsize: smallest record")
    parser.add_argument("--max-bytes", type=int, default=65536, help="Varsize: largest record")
    parser.add_argument("--skew", type=float, default=datagen.DEFAULT_SKEW, help="Varsize: size/position coupling")


def build_parser() -> argparse.ArgumentParser:
    common = _Parser(add_help=False)
    _add_settings_flags(common)

    parser = _Parser(prog="rsgrove", description="R*-Grove spatial partitioning and benchmarks")
    parser.add_argument("--version", action="version", version=f"rsgrove {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("generate", parents=[common], help="Write a synthetic dataset")
    p.add_argument("--kind", choices=datagen.DATASETS, default="uniform")
    p.add_argument("--count", type=int, required=True, help="Number of records")
    p.add_argument("--output", type=Path, required=True)
    _add_dataset_flags(p)
    p.set_defaults(handler=cmd_generate)

    p = sub.add_parser("sample", parents=[common], help="Draw the sample and storage-size histogram")
    p.add_argument("--input", type=Path, required=True)
    p.add_argument("--sample", type=Path, required=True, help="Sample JSON output")
    p.add_argument("--histogram", type=Path, help="Histogram JSON output")
    p.set_defaults(handler=cmd_sample)

    p = sub.add_parser("partition", parents=[common], help="Compute a partition scheme")
    p.add_argument("--sample", type=Path, required=True)
    p.add_argument("--histogram", type=Path, help="Histogram JSON for size weighting")
    p.add_argument("--output", type=Path, required=True, help="Scheme JSON output")
    p.set_defaults(handler=cmd_partition)

    p = sub.add_parser("assign", parents=[common], help="Write records into partition files")
    p.add_argument("--input", type=Path, required=True)
    p.add_argument("--scheme", type=Path, required=True)
    p.add_argument("--output-dir", type=Path, required=True)
    p.set_defaults(handler=cmd_assign)

    p = sub.add_parser("metrics", parents=[common], help="Quality metrics of an assigned directory")
    p.add_argument("--manifest", type=Path, required=True, help="Partition directory or _master file")
    p.add_argument("--format", choices=("table", "json", "csv"), default="table")
    p.add_argument("--output", type=Path)
    p.set_defaults(handler=cmd_metrics)

    p = sub.add_parser("rangequery", parents=[common], help="Run a batch of range queries")
    p.add_argument("--partitions", type=Path, required=True)
    p.add_argument("--queries", type=int, default=100, help="Number of queries")
    p.add_argument("--output", type=Path)
    p.set_defaults(handler=cmd_rangequery)

    p = sub.add_parser("sjoin", parents=[common], help="Spatially join two partitioned datasets")
    p.add_argument("--left", type=Path, required=True)
    p.add_argument("--right", type=Path, required=True)
    p.add_argument("--output", type=Path)
    p.set_defaults(handler=cmd_sjoin)

    p = sub.add_parser("sweep", parents=[common], help="Quality sweep over partitioners and ratios")
    source = p.add_mutually_exclusive_group(required=True)
    source.add_argument("--input", type=Path)
    source.add_argument("--dataset", choices=datagen.DATASETS)
    p.add_argument("--count", type=int, default=100_000, help="Generated records")
    p.add_argument("--partitioners", type=_name_list(PARTITIONERS), default=list(PARTITIONERS))
    p.add_argument("--ratios", type=_float_list, help="Sampling ratios, e.g. 0.01,0.05")
    p.add_argument("--strategies", type=_name_list(STRATEGIES), help="R*-style strategies")
    p.add_argument("--rhos", type=_float_list, help="Minimum split ratios, e.g. 0.1,0.2,0.4")
    p.add_argument("--queries", type=int, default=100, help="Range queries per run for the cost column")
    p.add_argument("--output", type=Path)
    _add_dataset_flags(p)
    p.set_defaults(handler=cmd_sweep)
    return parser


_SETTINGS_FLAGS = (
    "block_size", "alpha", "rho", "sample_ratio", "seed", "partitioner", "strategy", "mode",
    "grid_cells", "dims", "schema", "delimiter", "columns", "threads", "area_fraction", "log_level",
)


def main(argv: Optional[Sequence[str]] = None) -> int:
    """
    Run one subcommand.

    Returns:
        Process exit code
    """
    try:
        args = build_parser().parse_args(argv)
        if args.command == "sweep" and args.seed is None:
            raise UsageError("sweep requires an explicit --seed")
        overrides = {name: getattr(args, name) for name in _SETTINGS_FLAGS}
        settings = load_settings(args.config, overrides)
    except UsageError as e:
        sys.stderr.write(f"rsgrove: usage: {e}\n")
        return EXIT_USAGE
    except (ValueError, FileNotFoundError) as e:
        sys.stderr.write(f"rsgrove: usage: {e}\n")
        return EXIT_USAGE

    logging.basicConfig(
        level=settings.log_level,
        format="%(asctime)s %(levelname)s %(name)s: %(message)s",
        stream=sys.stderr,
    )
    try:
        return args.handler(args, settings)
    except DataError as e:
        sys.stderr.write(f"rsgrove: data error: {e}\n")
        return EXIT_DATA
    except GroveInternalError as e:
        logger.exception("Internal error")
        sys.stderr.write(f"rsgrove: internal error: {e}\n")
        return EXIT_INTERNAL
    except GroveError as e:
        sys.stderr.write(f"rsgrove: internal error: {e}\n")
        return EXIT_INTERNAL
    except ValueError as e:
        sys.stderr.write(f"rsgrove: usage: {e}\n")
        return EXIT_USAGE
    except OSError as e:
        sys.stderr.write(f"rsgrove: data error: {e}\n")
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
