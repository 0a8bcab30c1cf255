"""
End-to-end runs on the default 960-trace synthetic sets.

The three conditions share one seed, so every trace differs between them only
in distance attenuation or ambient flicker.
"""

import pytest

from config import Config
from evaluators import make_folds
from graph import cross_validate
from segmentation import PipelineConfig
from synth_generator import GenConfig, generate_dataset

pytestmark = pytest.mark.slow

_reports = {}


def _run(distance_cm: float, ambient_on: bool):
    key = (distance_cm, ambient_on)
    if key not in _reports:
        ds = generate_dataset(GenConfig(seed=Config.SEED, distance_cm=distance_cm, ambient_on=ambient_on))
        pipeline = PipelineConfig(denoise=Config.denoise_config(), segment=Config.segment_config())
        plan = make_folds(ds, K=10, seed=Config.SEED)
        _reports[key] = cross_validate(ds, pipeline, Config.knn_config(), plan)
    return _reports[key]


def test_desk_distance_with_ambient_light():
    report = _run(20.0, True)
    assert report.n_traces == 960
    assert report.mean_accuracy >= 0.90
    assert min(report.per_class_accuracy) >= 0.80


def test_accuracy_drops_with_distance():
    assert _run(20.0, True).mean_accuracy > _run(35.0, True).mean_accuracy


def test_ambient_light_barely_matters():
    assert abs(_run(20.0, True).mean_accuracy - _run(20.0, False).mean_accuracy) <= 0.05
