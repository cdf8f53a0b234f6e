import numpy as np
import pytest
from pydantic import ValidationError

from rsgrove.config import DATA_STREAM, MIB, QUERY_STREAM, SAMPLE_STREAM, Settings, load_settings, stream_rng


def test_defaults():
    settings = load_settings()
    assert settings.block_size == 128 * MIB
    assert settings.alpha == 0.95
    assert settings.rho == 0.4
    assert settings.partitioner == "rsgrove"
    assert settings.strategy == "grove"
    assert settings.disjoint
    assert settings.columns == []
    assert settings.worker_threads >= 1


def test_environment(monkeypatch):
    monkeypatch.setenv("GROVE_ALPHA", "0.8")
    monkeypatch.setenv("GROVE_MODE", "overlap")
    settings = load_settings()
    assert settings.alpha == 0.8
    assert not settings.disjoint


def test_file_beats_environment(tmp_path, monkeypatch):
    monkeypatch.setenv("GROVE_ALPHA", "0.8")
    config = tmp_path / "grove.conf"
    config.write_text("alpha=0.7\nsample-ratio=0.05\nschema=envelope\ncolumns=0,1,2,3\n", encoding="utf-8")
    settings = load_settings(config)
    assert settings.alpha == 0.7
    assert settings.sample_ratio == 0.05
    assert settings.schema_kind == "envelope"
    assert settings.columns == [0, 1, 2, 3]


def test_flags_beat_file(tmp_path):
    config = tmp_path / "grove.conf"
    config.write_text("alpha=0.7\nseed=3\n", encoding="utf-8")
    settings = load_settings(config, {"alpha": 0.6, "seed": None, "block_size": 4096})
    assert settings.alpha == 0.6
    assert settings.seed == 3
    assert settings.block_size == 4096


def test_missing_config_file(tmp_path):
    with pytest.raises(FileNotFoundError):
        load_settings(tmp_path / "absent.conf")


@pytest.mark.parametrize(
    "values",
    [
        {"alpha": 1.0},
        {"alpha": 0.0},
        {"rho": 0.6},
        {"block_size": 0},
        {"sample_ratio": 1.5},
        {"partitioner": "quadtree"},
        {"strategy": "whitebox"},
        {"log_level": "chatty"},
        {"seed": -1},
    ],
)
def test_rejects_bad_values(values):
    with pytest.raises(ValidationError):
        load_settings(overrides=values)


def test_log_level_is_normalized():
    assert Settings(log_level="debug").log_level == "DEBUG"


def test_unknown_config_key(tmp_path):
    config = tmp_path / "grove.conf"
    config.write_text("alhpa=0.5\nseed=3\n", encoding="utf-8")
    with pytest.raises(ValueError, match="alhpa"):
        load_settings(config)


# ========== Random streams ==========

def test_streams_of_one_seed_differ():
    data = stream_rng(7, DATA_STREAM).random(100)
    sample = stream_rng(7, SAMPLE_STREAM).random(100)
    queries = stream_rng(7, QUERY_STREAM).random(100)
    assert not np.array_equal(data, sample)
    assert not np.array_equal(sample, queries)
    assert abs(np.corrcoef(data, sample)[0, 1]) < 0.5


def test_stream_is_reproducible():
    np.testing.assert_array_equal(
        stream_rng(7, SAMPLE_STREAM).random(10),
        stream_rng(7, SAMPLE_STREAM).random(10),
    )


def test_negative_seed():
    with pytest.raises(ValueError):
        stream_rng(-1, DATA_STREAM)
