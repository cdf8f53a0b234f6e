import logging

import numpy as np
import pytest
from hypothesis import assume, given, settings, strategies as st

from rsgrove.assign_service import lookup_many
from rsgrove.errors import (
    InsufficientSampleError,
    InvalidPartitionSizeError,
    NoSplitCandidateError,
)
from rsgrove.geometry import Envelope
from rsgrove.grove_service import (
    CapacityConfig,
    GrovePartitioner,
    choose_split_axis,
    choose_split_point,
    choose_valid_split_point,
    choose_weighted_split_point,
    compute_capacity,
    correct_weights,
    enumerate_valid_ranges,
    grove_partition,
    is_valid,
    min_sample_bytes,
    min_valid_size,
    termination_bound,
)
from rsgrove.ingest_service import GridHistogram, WeightedSample, assign_weights, sample_arrays


def composition_oracle(limit: int, m: int, M: int) -> list:
    """reachable[s]: s is a sum of parts each within [m, M]."""
    reachable = [False] * (limit + 1)
    reachable[0] = True
    for s in range(1, limit + 1):
        reachable[s] = any(reachable[s - k] for k in range(m, min(M, s) + 1))
    return reachable


# ========== Validity ==========

class TestValidity:
    def test_examples(self):
        assert is_valid(28, 9, 10)
        assert not is_valid(14, 9, 10)
        assert not is_valid(62, 9, 10)
        assert not is_valid(0, 9, 10)

    def test_real_bounds(self):
        assert is_valid(1000.0, 450.0, 550.0)
        assert not is_valid(600.0, 450.0, 550.0)
        assert is_valid(550.0, 450.0, 550.0)

    def test_bad_bounds(self):
        with pytest.raises(ValueError):
            is_valid(10, 5, 4)
        with pytest.raises(ValueError):
            is_valid(10, 0, 4)

    def test_matches_composition_oracle(self):
        limit = 400
        for M in range(1, 26):
            for m in range(1, M + 1):
                reachable = composition_oracle(limit, m, M)
                for s in range(1, limit + 1):
                    assert is_valid(s, m, M) == reachable[s], (s, m, M)

    def test_every_total_above_threshold_is_valid(self):
        for M in range(2, 26):
            for m in range(1, M):
                threshold = min_valid_size(m, M)
                reachable = composition_oracle(threshold + 300, m, M)
                assert all(reachable[threshold:])

    def test_threshold_example(self):
        assert min_valid_size(9, 10) == 81
        invalid = [s for s in range(1, 81) if not is_valid(s, 9, 10)]
        assert 71 in invalid
        assert max(invalid) == 71

    def test_threshold_undefined_for_equal_bounds(self):
        with pytest.raises(InvalidPartitionSizeError):
            min_valid_size(5, 5)


def test_min_sample_bytes():
    assert min_sample_bytes(0.95, 0.01, 128_000_000) == pytest.approx(23_104_000)
    with pytest.raises(ValueError):
        min_sample_bytes(1.0, 0.01, 10)


# ========== Capacity ==========

class TestCapacity:
    def test_record_count_mode(self, collinear_sample, caplog):
        with caplog.at_level(logging.WARNING):
            cfg = compute_capacity(collinear_sample, block_size=10, alpha=0.95)
        assert cfg.max_capacity == 10
        assert cfg.min_capacity == 9
        assert cfg.desired_partitions == 3
        assert not cfg.weighted
        assert "below S*" in caplog.text

    def test_insufficient_sample(self):
        sample = WeightedSample.from_points(np.arange(62, dtype=np.float64).reshape(-1, 1))
        with pytest.raises(InsufficientSampleError, match="Sample at least"):
            compute_capacity(sample, block_size=10, alpha=0.95)

    def test_check_can_be_skipped(self):
        sample = WeightedSample.from_points(np.arange(62, dtype=np.float64).reshape(-1, 1))
        cfg = compute_capacity(sample, block_size=10, alpha=0.95, check=False)
        assert cfg.bounds == (9, 10)

    def test_weighted_mode(self):
        points = np.array([[0.0, 0.0], [1.0, 1.0], [2.0, 2.0], [3.0, 3.0]])
        sample = WeightedSample(
            points=points,
            weights=np.full(4, 250.0),
            total_input_size=1000,
            record_count=4,
            domain=Envelope.of_points(points),
            weighted=True,
        )
        cfg = compute_capacity(sample, block_size=500, alpha=0.5)
        assert cfg.weighted
        assert cfg.desired_partitions == 2
        assert cfg.max_capacity == 500
        assert cfg.min_capacity == 250

    @pytest.mark.parametrize("block_size, alpha", [(0, 0.9), (10, 0.0), (10, 1.0)])
    def test_bad_parameters(self, collinear_sample, block_size, alpha):
        with pytest.raises(ValueError):
            compute_capacity(collinear_sample, block_size, alpha)


# ========== Split search ==========

class TestSplitSearch:
    def test_valid_split_of_collinear_points(self):
        points = np.arange(28, dtype=np.float64).reshape(-1, 1)
        assert choose_valid_split_point(points, 9, 10) == 10
        assert choose_valid_split_point(points, 9, 10, rho=0.4) == -1

    def test_no_valid_split_of_fourteen(self):
        points = np.arange(14, dtype=np.float64).reshape(-1, 1)
        assert choose_valid_split_point(points, 9, 10) == -1

    def test_weighted_split(self):
        points = np.arange(5, dtype=np.float64).reshape(-1, 1)
        assert choose_weighted_split_point(points, [200, 200, 100, 300, 200], 450, 550) == 3
        assert choose_weighted_split_point(points, [200] * 5, 450, 550) == -1

    def test_unconstrained_split_prefers_small_volume(self):
        points = np.array([[0.0, 0.0], [1.0, 1.0], [2.0, 0.0], [10.0, 5.0], [11.0, 0.0], [12.0, 5.0]])
        assert choose_split_point(points, 1) == 3
        assert choose_split_point(points[:1], 1) == -1

    def test_split_between_two_clusters(self):
        cluster = np.array([[0.0, 0.0], [0.1, 0.3], [0.2, 0.1], [0.3, 0.4], [0.4, 0.2]])
        points = np.vstack([cluster, cluster + [10.0, 0.0]])
        assert choose_split_point(points, 2) == 5

    @pytest.mark.parametrize("n, expected", [(9, 5), (10, 5), (11, 6)])
    def test_collinear_split_is_balanced(self, n, expected):
        points = np.arange(n, dtype=np.float64).reshape(-1, 1)
        assert choose_split_point(points, 1) == expected

    def test_exactly_twice_the_minimum_splits_in_half(self, rng):
        points = np.sort(rng.random((6, 2)), axis=0)
        assert choose_split_point(points, 3) == 3

    def test_split_axis_of_a_horizontal_line(self):
        points = np.column_stack([np.arange(10, dtype=np.float64), np.zeros(10)])
        assert choose_split_axis(points, np.ones(10), 2) == 0

    def test_split_axis_of_a_vertical_line(self):
        points = np.column_stack([np.zeros(10), np.arange(10, dtype=np.float64)])
        assert choose_split_axis(points, np.ones(10), 2) == 1

    def test_split_axis_tie_goes_to_the_lower_axis(self):
        corners = np.array([[0.0, 0.0], [0.0, 1.0], [1.0, 0.0], [1.0, 1.0]])
        assert choose_split_axis(corners, np.ones(4), 1) == 0

    def test_split_axis_prefers_the_spread_axis(self, rng):
        points = np.column_stack([rng.random(100) * 0.01, rng.random(100)])
        assert choose_split_axis(points, np.ones(100), 10) == 1

    def test_split_axis_skips_constant_axis(self):
        points = np.column_stack([np.zeros(6), np.arange(6, dtype=np.float64)])
        assert choose_split_axis(points, np.ones(6), 1) == 1

    def test_split_axis_without_candidates(self):
        with pytest.raises(NoSplitCandidateError):
            choose_split_axis(np.array([[0.0, 0.0], [1.0, 1.0]]), np.ones(2), 2)


# ========== Weight correction ==========

class TestWeightCorrection:
    def test_ranges_example(self):
        assert enumerate_valid_ranges(28, 9, 10) == [(9, 10), (18, 19)]
        assert enumerate_valid_ranges(1000.0, 450.0, 550.0) == [(450.0, 550.0)]

    def test_ranges_need_a_valid_total(self):
        with pytest.raises(InvalidPartitionSizeError):
            enumerate_valid_ranges(14, 9, 10)

    @settings(max_examples=200, deadline=None)
    @given(st.integers(1, 12), st.integers(0, 12), st.integers(2, 200))
    def test_ranges_hold_exactly_the_valid_left_totals(self, m, spread, total):
        M = m + spread
        assume(is_valid(total, m, M))
        ranges = enumerate_valid_ranges(total, m, M)
        for left in range(1, total):
            both = is_valid(left, m, M) and is_valid(total - left, m, M)
            assert both == any(start <= left <= end for start, end in ranges), left

    def test_correction_example(self):
        weights = np.full(5, 200.0)
        corrected = correct_weights(np.cumsum(weights), weights, [(450.0, 550.0)])
        np.testing.assert_allclose(corrected, [200.0, 200.0, 100.0, 300.0, 200.0])
        assert corrected.sum() == pytest.approx(1000.0)

    def test_correction_without_following_point(self, caplog):
        weights = np.array([100.0, 100.0])
        with caplog.at_level(logging.WARNING):
            corrected = correct_weights(np.cumsum(weights), weights, [(250.0, 260.0)])
        np.testing.assert_array_equal(corrected, weights)
        assert "skipping" in caplog.text


def test_termination_bound():
    assert termination_bound(100, 10, 0.4) == 6
    assert termination_bound(100, 10, 0.0) == 0


# ========== Partitioner ==========

def _weighted_cfg(m: float, M: float) -> CapacityConfig:
    return CapacityConfig(
        block_size=500,
        alpha=m / M,
        rho=0.4,
        desired_partitions=2,
        max_capacity=M,
        min_capacity=m,
        weighted=True,
    )


class TestGrovePartitioner:
    def test_collinear_example(self, collinear_sample):
        cfg = compute_capacity(collinear_sample, block_size=10, alpha=0.95)
        partitioner = GrovePartitioner(collinear_sample, cfg, "graybox")
        scheme = partitioner.run()
        assert [p.point_count for p in scheme.partitions] == [10, 9, 9]
        assert partitioner.relaxed == 1
        assert partitioner.corrections == 0
        assert scheme.strategy == "graybox"
        assert scheme.partitions[0].mbb == Envelope((0.0,), (9.0,))

    def test_weighted_example_needs_one_correction(self):
        points = np.array([[float(i), float(i)] for i in range(5)])
        sample = WeightedSample(
            points=points,
            weights=np.full(5, 200.0),
            total_input_size=1000,
            record_count=5,
            domain=Envelope.of_points(points),
            weighted=True,
        )
        partitioner = GrovePartitioner(sample, _weighted_cfg(450.0, 550.0), "grove")
        scheme = partitioner.run()
        assert partitioner.corrections == 1
        assert [p.expected_weight for p in scheme.partitions] == [500.0, 500.0]
        assert [p.point_count for p in scheme.partitions] == [3, 2]

    def test_invalid_total(self):
        sample = WeightedSample.from_points(np.arange(14, dtype=np.float64).reshape(-1, 1))
        cfg = compute_capacity(sample, block_size=10, alpha=0.95, check=False)
        with pytest.raises(InvalidPartitionSizeError):
            grove_partition(sample, cfg, "graybox")

    def test_unknown_strategy(self, collinear_sample):
        cfg = compute_capacity(collinear_sample, block_size=10, alpha=0.95)
        with pytest.raises(ValueError):
            GrovePartitioner(collinear_sample, cfg, "whitebox")

    @pytest.mark.parametrize("strategy", ["graybox", "grove"])
    @pytest.mark.parametrize("seed", [1, 2, 3])
    def test_every_partition_within_capacity(self, strategy, seed):
        points = np.random.default_rng(seed).random((1000, 2))
        sample = WeightedSample.from_points(points)
        cfg = compute_capacity(sample, block_size=40, alpha=0.8)
        m, M = cfg.bounds
        partitioner = GrovePartitioner(sample, cfg, strategy)
        scheme = partitioner.run()
        counts = [p.point_count for p in scheme.partitions]
        assert all(m <= c <= M for c in counts)
        assert sum(counts) == 1000
        assert partitioner.max_constrained_depth <= termination_bound(1000, M, cfg.rho)
        np.testing.assert_array_equal(lookup_many(scheme.aux, points), partitioner.assignment)

    @pytest.mark.parametrize("strategy", ["graybox", "grove"])
    def test_same_sample_same_scheme(self, strategy):
        points = np.random.default_rng(21).random((2000, 3))
        cfg = compute_capacity(WeightedSample.from_points(points), block_size=50, alpha=0.9)
        first = grove_partition(WeightedSample.from_points(points), cfg, strategy)
        second = grove_partition(WeightedSample.from_points(points.copy()), cfg, strategy)
        assert first.aux == second.aux
        assert [p.mbb for p in first.partitions] == [p.mbb for p in second.partitions]
        assert first.to_json() == second.to_json()

    def test_weighted_partitions_within_capacity(self):
        rng = np.random.default_rng(5)
        points = rng.random((20000, 2))
        sizes = np.floor(50 + 450 * points[:, 0] ** 2 + rng.random(20000) * 50).astype(np.int64)
        sample = sample_arrays(points, sizes, 0.1, seed=5)
        hist = GridHistogram.empty(sample.domain, [10, 10])
        hist.add(points, sizes)
        weighted = assign_weights(sample, hist)
        block = int(sizes.sum()) // 12
        cfg = compute_capacity(weighted, block_size=block, alpha=0.8)
        m, M = cfg.bounds
        scheme = grove_partition(weighted, cfg, "grove")
        slack = 1e-6 * M
        for p in scheme.partitions:
            assert m - slack <= p.expected_weight <= M + slack
        assert sum(p.expected_weight for p in scheme.partitions) == pytest.approx(weighted.total_weight)

    def test_blackbox_ignores_validity(self):
        sample = WeightedSample.from_points(np.random.default_rng(9).random((62, 2)))
        cfg = compute_capacity(sample, block_size=10, alpha=0.95, check=False)
        scheme = grove_partition(sample, cfg, "blackbox")
        counts = [p.point_count for p in scheme.partitions]
        assert sum(counts) == 62
        assert max(counts) <= 10
        assert min(counts) >= 1

    def test_scheme_records_capacity(self, collinear_sample):
        cfg = compute_capacity(collinear_sample, block_size=10, alpha=0.95)
        scheme = grove_partition(collinear_sample, cfg, "grove", disjoint=False)
        assert scheme.mode == "overlap"
        assert scheme.max_capacity == 10
        assert scheme.block_size == 10
        assert scheme.partitioner == "rsgrove"

    def test_single_heavy_point_becomes_its_own_partition(self, caplog):
        points = np.array([[0.0], [1.0], [2.0]])
        sample = WeightedSample(
            points=points,
            weights=np.array([500.0, 500.0, 1500.0]),
            total_input_size=2500,
            record_count=3,
            domain=Envelope.of_points(points),
            weighted=True,
        )
        with caplog.at_level(logging.WARNING):
            scheme = grove_partition(sample, _weighted_cfg(500.0, 1000.0), "grove")
        assert [p.point_count for p in scheme.partitions] == [2, 1]
        assert "own partition" in caplog.text
