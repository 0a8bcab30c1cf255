"""
Synthetic trace generator

Stands in for recorded volunteer data. A trace is

    baseline + a(d) * g(t) + n(t)

where g(t) is the class template's Gaussian pulses (time-stretched, amplitude
jittered and placed at a random onset), a(d) = (d_ref / d)^2 is inverse-square
attenuation, and n(t) is white Gaussian sensor noise snr_ref_db below the
baseline intensity plus, with ambient light on, flicker tones at their aliased
frequencies in a 100 Hz record (20 Hz for ceiling lights at 120 Hz, 40 Hz for
monitors at 60 Hz).

Randomness is split per trace with numpy SeedSequence, so trace i is the same
no matter how many traces are generated or in what order. Every trace draws
the same variates regardless of distance or ambient setting; matched-seed
conditions therefore differ only in the modelled factor.
"""

import json
import logging
import math
from pathlib import Path
from typing import Dict, List, Optional, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator, model_validator

from config import Config
from file_io import PathLike
from trace_model import AcquisitionMeta, Dataset, GestureLabel, Trace

MAX_TEMPLATE_S = 3.0


class GeneratorError(ValueError):
    """Invalid generator configuration or template file"""


class Pulse(BaseModel):
    model_config = ConfigDict(frozen=True)

    center_frac: float = Field(ge=0, le=1)
    width_s: float = Field(gt=0, allow_inf_nan=False)
    amplitude: float = Field(allow_inf_nan=False)


class ClassTemplate(BaseModel):
    """Pulse composition describing one gesture class"""
    model_config = ConfigDict(frozen=True)

    label: GestureLabel
    name: str = ""
    duration_s: float = Field(ge=2.0, le=MAX_TEMPLATE_S)
    pulses: Tuple[Pulse, ...] = Field(min_length=1, max_length=4)

    @field_validator("label", mode="before")
    @classmethod
    def _parse_label(cls, value):
        if isinstance(value, str):
            return GestureLabel.from_letter(value)
        return value

    @field_validator("pulses")
    @classmethod
    def _increasing_centers(cls, pulses):
        centers = [p.center_frac for p in pulses]
        if any(b <= a for a, b in zip(centers, centers[1:])):
            raise ValueError("pulse centers must be strictly increasing")
        return pulses


class GenConfig(BaseModel):
    """Generator settings; defaults reproduce a 960-trace, 20 cm, ambient-on set"""
    model_config = ConfigDict(frozen=True)

    seed: int = 0
    reps_per_class: int = Field(default=120, ge=1)
    distance_cm: float = Field(default=20.0, gt=0, allow_inf_nan=False)
    ambient_on: bool = True
    baseline: float = Field(default=1.0, gt=0, allow_inf_nan=False)
    gesture_amplitude: float = Field(default=0.2, gt=0, allow_inf_nan=False)
    snr_ref_db: float = 25.0
    reference_distance_cm: float = Field(default=20.0, gt=0, allow_inf_nan=False)
    time_jitter: float = Field(default=0.15, ge=0, lt=1)
    amp_jitter: float = Field(default=0.2, ge=0, lt=1)
    onset_range_s: Tuple[float, float] = (0.5, 2.5)
    flicker_rel_amplitude: float = Field(default=0.1, ge=0)
    flicker_hz: Tuple[float, ...] = (20.0, 40.0)
    volunteers: int = Field(default=5, ge=1)
    volunteer_tempo_spread: float = Field(default=0.05, ge=0, lt=1)
    volunteer_amp_spread: float = Field(default=0.1, ge=0, lt=1)
    sample_rate_hz: float = Field(default=100.0, gt=0, allow_inf_nan=False)
    duration_s: float = Field(default=6.0, gt=MAX_TEMPLATE_S, allow_inf_nan=False)

    @field_validator("snr_ref_db")
    @classmethod
    def _snr_not_nan(cls, value):
        if math.isnan(value):
            raise ValueError("snr_ref_db must be a number (inf disables white noise)")
        return value

    @model_validator(mode="after")
    def _onset_fits(self):
        lo, hi = self.onset_range_s
        if not 0 <= lo <= hi <= self.duration_s - MAX_TEMPLATE_S:
            raise ValueError(
                f"onset_range_s must satisfy 0 <= lo <= hi <= {self.duration_s - MAX_TEMPLATE_S:g}, got {self.onset_range_s}"
            )
        return self

    @property
    def n_samples(self) -> int:
        return int(round(self.sample_rate_hz * self.duration_s))

    @property
    def attenuation(self) -> float:
        return (self.reference_distance_cm / self.distance_cm) ** 2

    @property
    def noise_sigma(self) -> float:
        """White-noise level: the received baseline intensity sits snr_ref_db above it.

        The gesture is a gesture_amplitude fraction of the baseline at the
        reference distance, so its own SNR falls with a(d) while the noise stays put."""
        return self.baseline * 10.0 ** (-self.snr_ref_db / 20.0)


# ============================================================================
# Templates
# ============================================================================

def load_templates(path: Optional[PathLike] = None) -> Dict[GestureLabel, ClassTemplate]:
    """Read the template file; all 8 classes must be present exactly once"""
    path = Path(path or Config.TEMPLATES_PATH)
    try:
        payload = json.loads(path.read_text(encoding="utf-8"))
        templates = [ClassTemplate(**item) for item in payload["templates"]]
    except (KeyError, TypeError, json.JSONDecodeError, ValidationError) as e:
        raise GeneratorError(f"invalid template file {path}: {e}") from e

    by_label = {}
    for template in templates:
        if template.label in by_label:
            raise GeneratorError(f"duplicate template for label {template.label.letter}")
        by_label[template.label] = template
    missing = [label.letter for label in GestureLabel if label not in by_label]
    if missing:
        raise GeneratorError(f"template file {path} lacks label(s) {', '.join(missing)}")
    return by_label


def render_gesture(
    template: ClassTemplate,
    t: np.ndarray,
    onset_s: float,
    stretch: float = 1.0,
    amp_factors: Optional[np.ndarray] = None,
    scale: float = 1.0
) -> np.ndarray:
    """g(t): sum of the template's Gaussian pulses"""
    if amp_factors is None:
        amp_factors = np.ones(len(template.pulses))
    g = np.zeros_like(t, dtype=np.float64)
    for pulse, factor in zip(template.pulses, amp_factors):
        center = onset_s + pulse.center_frac * template.duration_s * stretch
        width = pulse.width_s * stretch
        g += scale * pulse.amplitude * factor * np.exp(-0.5 * ((t - center) / width) ** 2)
    return g


# ============================================================================
# Traces and datasets
# ============================================================================

def generate_trace(
    template: ClassTemplate,
    cfg: GenConfig,
    rng_state: np.random.Generator,
    volunteer_bias: Tuple[float, float] = (1.0, 1.0)
) -> Trace:
    """One labeled trace; deterministic given rng_state"""
    tempo_bias, amp_bias = volunteer_bias
    n = cfg.n_samples
    t = np.arange(n) / cfg.sample_rate_hz

    # fixed draw order, independent of distance and ambient
    onset = rng_state.uniform(*cfg.onset_range_s)
    stretch = tempo_bias * (1.0 + rng_state.uniform(-cfg.time_jitter, cfg.time_jitter))
    amp_factors = amp_bias * (1.0 + rng_state.uniform(-cfg.amp_jitter, cfg.amp_jitter, size=len(template.pulses)))
    white = rng_state.standard_normal(n)
    phases = rng_state.uniform(0.0, 2.0 * np.pi, size=len(cfg.flicker_hz))

    gesture = render_gesture(template, t, onset, stretch, amp_factors, scale=cfg.gesture_amplitude)
    samples = cfg.baseline + cfg.attenuation * gesture + cfg.noise_sigma * white
    if cfg.ambient_on:
        flicker_amp = cfg.flicker_rel_amplitude * cfg.baseline
        for freq, phase in zip(cfg.flicker_hz, phases):
            samples = samples + flicker_amp * np.sin(2.0 * np.pi * freq * t + phase)

    meta = AcquisitionMeta(
        distance_cm=cfg.distance_cm,
        ambient_on=cfg.ambient_on,
        sample_rate_hz=cfg.sample_rate_hz,
        duration_s=cfg.duration_s,
    )
    return Trace(samples=samples, meta=meta, label=template.label)


def _volunteer_biases(cfg: GenConfig, seq: np.random.SeedSequence) -> List[Tuple[float, float]]:
    rng = np.random.default_rng(seq)
    tempo = 1.0 + rng.uniform(-cfg.volunteer_tempo_spread, cfg.volunteer_tempo_spread, size=cfg.volunteers)
    amp = 1.0 + rng.uniform(-cfg.volunteer_amp_spread, cfg.volunteer_amp_spread, size=cfg.volunteers)
    return list(zip(tempo.tolist(), amp.tolist()))


def generate_dataset(cfg: GenConfig, templates: Optional[Dict[GestureLabel, ClassTemplate]] = None) -> Dataset:
    """reps_per_class traces of every class, shuffled by seed"""
    templates = templates or load_templates()
    labels = list(GestureLabel)
    total = len(labels) * cfg.reps_per_class

    root = np.random.SeedSequence(cfg.seed & (2 ** 64 - 1))
    trace_seq, volunteer_seq, shuffle_seq = root.spawn(3)
    streams = trace_seq.spawn(total)
    biases = _volunteer_biases(cfg, volunteer_seq)

    traces = []
    for index in range(total):
        label = labels[index // cfg.reps_per_class]
        rep = index % cfg.reps_per_class
        rng = np.random.default_rng(streams[index])
        traces.append(generate_trace(templates[label], cfg, rng, biases[rep % cfg.volunteers]))

    order = np.random.default_rng(shuffle_seq).permutation(total)
    logging.info(
        f"[Generator] {total} traces: seed={cfg.seed}, d={cfg.distance_cm:g} cm, "
        f"ambient={'on' if cfg.ambient_on else 'off'}, noise sigma={cfg.noise_sigma:.4g}"
    )
    return Dataset(tuple(traces[i] for i in order))


def band_power(samples: np.ndarray, sample_rate_hz: float, lo_hz: float, hi_hz: float) -> float:
    """Summed DFT power of the mean-removed signal in [lo_hz, hi_hz]"""
    x = np.asarray(samples, dtype=np.float64)
    spectrum = np.abs(np.fft.rfft(x - x.mean())) ** 2
    freqs = np.fft.rfftfreq(x.size, d=1.0 / sample_rate_hz)
    return float(spectrum[(freqs >= lo_hz) & (freqs <= hi_hz)].sum())


def spectral_snr_db(
    trace: Trace,
    signal_band: Tuple[float, float] = (0.1, 3.0),
    noise_band: Tuple[float, float] = (8.0, 18.0)
) -> float:
    """Gesture-band power over a flicker-free noise band, in dB"""
    rate = trace.meta.sample_rate_hz
    signal = band_power(trace.samples, rate, *signal_band)
    noise = band_power(trace.samples, rate, *noise_band)
    return 10.0 * math.log10(signal / noise)
