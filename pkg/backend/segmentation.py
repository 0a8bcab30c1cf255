"""
Segmentation and standardization

The middle blocks of the preprocessing chain, in order:
denoise -> detect_segment -> extract_and_pad -> standardize.

Segmentation thresholds an activity envelope (moving average of the absolute
deviation from the trace median) at a fraction of its peak, so it needs no
absolute intensity level. Segments are padded at the tail with zeros and the
full fixed-length vector is Z-scored.
"""

import logging
from dataclasses import dataclass
from typing import NamedTuple, Optional, Sequence

import numpy as np
from pydantic import BaseModel, ConfigDict, Field

from trace_model import GestureLabel, Trace
from wavelet_denoise import DenoiseConfig, denoise

MIN_STD = 1e-12


class SegmentationError(ValueError):
    """Trace cannot be segmented with the given settings"""


class StandardizationError(ValueError):
    """Vector cannot be Z-scored"""


class ConstantVectorError(StandardizationError):
    """No variation left to standardize: the trace carries no gesture content"""

    def __init__(self, message: str = "constant vector"):
        super().__init__(message)


class SegmentConfig(BaseModel):
    """Time-domain thresholding and padding settings"""
    model_config = ConfigDict(frozen=True)

    envelope_window_s: float = Field(default=0.25, gt=0, allow_inf_nan=False)
    rel_threshold: float = Field(default=0.2, gt=0, lt=1)
    margin_s: float = Field(default=0.1, ge=0, allow_inf_nan=False)
    fixed_len: int = Field(default=600, ge=1)

    def window_samples(self, sample_rate_hz: float) -> int:
        return int(round(self.envelope_window_s * sample_rate_hz))

    def margin_samples(self, sample_rate_hz: float) -> int:
        return int(round(self.margin_s * sample_rate_hz))


class PipelineConfig(BaseModel):
    """Everything preprocess() needs, kept together for model files and reports"""
    model_config = ConfigDict(frozen=True)

    denoise: DenoiseConfig = DenoiseConfig()
    segment: SegmentConfig = SegmentConfig()


@dataclass(frozen=True)
class Segment:
    """Inclusive sample range of the detected gesture"""
    start_idx: int
    end_idx: int

    def __post_init__(self):
        if not 0 <= self.start_idx <= self.end_idx:
            raise SegmentationError(f"invalid segment [{self.start_idx}, {self.end_idx}]")

    def __len__(self) -> int:
        return self.end_idx - self.start_idx + 1

    def check_within(self, length: int) -> None:
        if self.end_idx >= length:
            raise SegmentationError(f"segment end {self.end_idx} outside trace of length {length}")


@dataclass(frozen=True, eq=False)
class FeatureVector:
    """Fixed-length standardized vector fed to the classifier"""
    values: np.ndarray
    label: Optional[GestureLabel] = None

    def __post_init__(self):
        values = np.array(self.values, dtype=np.float64, copy=True).reshape(-1)
        values.flags.writeable = False
        object.__setattr__(self, "values", values)
        if self.label is not None and not isinstance(self.label, GestureLabel):
            object.__setattr__(self, "label", GestureLabel(self.label))

    def __len__(self) -> int:
        return int(self.values.size)


class PipelineStages(NamedTuple):
    """Intermediate signals of one preprocess() run"""
    raw: np.ndarray
    denoised: np.ndarray
    segment: Segment
    padded: np.ndarray
    standardized: np.ndarray


def activity_envelope(samples: Sequence[float], window: int) -> np.ndarray:
    """Centred moving average of |x - median(x)|"""
    x = np.asarray(samples, dtype=np.float64)
    deviation = np.abs(x - np.median(x))
    return np.convolve(deviation, np.ones(window) / window, mode="same")


def detect_segment(trace: Trace, config: SegmentConfig) -> Segment:
    """Locate the gesture burst between the first and last envelope crossings"""
    rate = trace.meta.sample_rate_hz
    window = config.window_samples(rate)
    n = len(trace)
    if window < 2:
        raise SegmentationError(f"envelope window of {window} sample(s) is too short (need >= 2)")
    if n < window:
        raise SegmentationError(f"trace shorter than envelope window ({n} < {window} samples)")

    envelope = activity_envelope(trace.samples, window)
    peak = float(envelope.max())
    if peak <= 0:
        return Segment(0, n - 1)

    active = np.flatnonzero(envelope > config.rel_threshold * peak)
    margin = config.margin_samples(rate)
    start = max(0, int(active[0]) - margin)
    end = min(n - 1, int(active[-1]) + margin)
    return Segment(start, end)


def extract_and_pad(trace: Trace, seg: Segment, fixed_len: int) -> np.ndarray:
    """Segment samples followed by trailing zeros; over-long segments keep their head"""
    if fixed_len <= 0:
        raise SegmentationError(f"fixed_len must be positive, got {fixed_len}")
    seg.check_within(len(trace))
    part = trace.samples[seg.start_idx: seg.end_idx + 1][:fixed_len]
    out = np.zeros(fixed_len, dtype=np.float64)
    out[: part.size] = part
    return out


def standardize(values: Sequence[float]) -> np.ndarray:
    """Z-score with the population standard deviation"""
    x = np.asarray(values, dtype=np.float64)
    if x.size < 2:
        raise StandardizationError(f"need at least 2 values to standardize, got {x.size}")
    std = float(x.std())
    if std < MIN_STD:
        raise ConstantVectorError()
    return (x - x.mean()) / std


def preprocess_stages(trace: Trace, denoise_cfg: DenoiseConfig, seg_cfg: SegmentConfig) -> PipelineStages:
    denoised = denoise(trace, denoise_cfg)
    segment = detect_segment(denoised, seg_cfg)
    # padding joins the gesture at its resting level, not at the raw DC offset
    baseline = float(np.median(denoised.samples))
    centered = denoised.with_samples(denoised.samples - baseline)
    padded = extract_and_pad(centered, segment, seg_cfg.fixed_len)
    logging.debug(f"[Segment] [{segment.start_idx}, {segment.end_idx}] baseline={baseline:.4g}")
    return PipelineStages(
        raw=np.asarray(trace.samples),
        denoised=np.asarray(denoised.samples),
        segment=segment,
        padded=padded,
        standardized=standardize(padded),
    )


def preprocess(trace: Trace, denoise_cfg: DenoiseConfig, seg_cfg: SegmentConfig) -> FeatureVector:
    """Full chain for one trace; the label is carried through"""
    stages = preprocess_stages(trace, denoise_cfg, seg_cfg)
    return FeatureVector(values=stages.standardized, label=trace.label)
