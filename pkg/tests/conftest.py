import math

import numpy as np
import pytest

from synth_generator import GenConfig, generate_dataset
from trace_model import AcquisitionMeta, Dataset, GestureLabel, Trace


def _make_trace(samples, label="a", distance_cm=20.0, ambient_on=True, sample_rate_hz=100.0) -> Trace:
    samples = np.asarray(samples, dtype=np.float64)
    meta = AcquisitionMeta(
        distance_cm=distance_cm,
        ambient_on=ambient_on,
        sample_rate_hz=sample_rate_hz,
        duration_s=samples.size / sample_rate_hz,
    )
    return Trace(samples=samples, meta=meta, label=GestureLabel.from_letter(label) if label else None)


@pytest.fixture
def make_trace():
    """Trace factory: samples plus optional label/metadata overrides"""
    return _make_trace


@pytest.fixture
def make_dataset():
    """Dataset of short random traces with the given label letters"""
    def factory(labels, n_samples=10, seed=0):
        rng = np.random.default_rng(seed)
        return Dataset(tuple(_make_trace(rng.normal(size=n_samples), label=letter) for letter in labels))
    return factory


@pytest.fixture(scope="session")
def clean_config() -> GenConfig:
    # every repetition of a class is identical: no noise, jitter, flicker or volunteer bias
    return GenConfig(
        seed=5,
        reps_per_class=10,
        ambient_on=False,
        snr_ref_db=math.inf,
        time_jitter=0.0,
        amp_jitter=0.0,
        onset_range_s=(1.0, 1.0),
        volunteer_tempo_spread=0.0,
        volunteer_amp_spread=0.0,
    )


@pytest.fixture(scope="session")
def clean_dataset(clean_config) -> Dataset:
    return generate_dataset(clean_config)


@pytest.fixture(scope="session")
def small_dataset() -> Dataset:
    """96 noisy traces, 12 per class"""
    return generate_dataset(GenConfig(seed=11, reps_per_class=12))
