import os

import pytest

from config import Config
from file_io import atomic_write_text, infer_format
from wavelet_denoise import WaveletId


def test_factories_use_defaults_and_skip_none():
    denoise = Config.denoise_config(levels=None, wavelet_id="haar")
    assert denoise.wavelet_id is WaveletId.HAAR
    assert denoise.levels == Config.LEVELS

    segment = Config.segment_config(fixed_len=256)
    assert segment.fixed_len == 256
    assert segment.rel_threshold == Config.REL_THRESHOLD

    knn = Config.knn_config(metric="manhattan")
    assert (knn.k, knn.metric) == (Config.K, "manhattan")


def test_factories_validate():
    with pytest.raises(ValueError):
        Config.knn_config(k=0)
    with pytest.raises(ValueError):
        Config.segment_config(rel_threshold=1.0)


def test_summary_lists_every_knob():
    summary = Config.summary()
    assert summary["seed"] == Config.SEED
    assert summary["templates"].endswith(".json")


def test_atomic_write_leaves_no_temp_files(tmp_path):
    target = tmp_path / "out.txt"
    atomic_write_text(target, "first\n")
    atomic_write_text(target, "second\n")
    assert target.read_text() == "second\n"
    assert os.listdir(tmp_path) == ["out.txt"]


def test_infer_format():
    assert infer_format("a/b/data.CSV") == "csv"
    assert infer_format("r.json") == "json"
    with pytest.raises(ValueError, match="Cannot infer format"):
        infer_format("data.txt")
