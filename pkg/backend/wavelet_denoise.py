"""
Discrete wavelet denoising

Forward DWT, detail-coefficient thresholding and inverse DWT, built on
PyWavelets with half-sample symmetric boundary extension. Band lengths follow
the symmetric-extension cascade (floor((n + L - 1) / 2) per level), so any
signal length works, including the 600-sample records.

The default chain is db4, 4 levels, universal threshold (sigma * sqrt(2 ln N))
with sigma estimated from the finest detail band by MAD, soft shrinkage.
"""

import logging
import math
from dataclasses import dataclass
from enum import Enum
from typing import List, Literal, Sequence, Tuple, Union

import numpy as np
import pywt
from pydantic import BaseModel, ConfigDict, Field, field_validator

from trace_model import Trace

BOUNDARY_MODE = "symmetric"
MAD_NORMALIZER = 0.6745


class WaveletError(ValueError):
    """Invalid transform request or inconsistent decomposition"""


class WaveletId(str, Enum):
    HAAR = "haar"
    DB2 = "db2"
    DB4 = "db4"


class DenoiseConfig(BaseModel):
    """Settings for the wavelet denoising block"""
    model_config = ConfigDict(frozen=True)

    wavelet_id: WaveletId = WaveletId.DB4
    levels: int = Field(default=4, ge=1)
    threshold_rule: Union[Literal["universal"], float] = "universal"
    threshold_mode: Literal["soft", "hard"] = "soft"

    @field_validator("threshold_rule", mode="before")
    @classmethod
    def _parse_rule(cls, value):
        if isinstance(value, str) and value.strip().lower() != "universal":
            try:
                value = float(value)
            except ValueError:
                raise ValueError(f"threshold must be 'universal' or a number, got '{value}'") from None
        if isinstance(value, str):
            return "universal"
        if isinstance(value, bool) or not isinstance(value, (int, float)) or math.isnan(value):
            raise ValueError("threshold must be 'universal' or a number")
        if float(value) < 0:
            raise ValueError(f"fixed threshold must be non-negative, got {value}")
        return float(value)


@dataclass(frozen=True, eq=False)
class WaveletDecomposition:
    """Coarsest approximation plus detail bands ordered finest-to-coarsest"""
    approx: np.ndarray
    details: Tuple[np.ndarray, ...]
    levels: int
    original_len: int
    wavelet_id: WaveletId

    def __post_init__(self):
        object.__setattr__(self, "approx", np.asarray(self.approx, dtype=np.float64))
        object.__setattr__(self, "details", tuple(np.asarray(d, dtype=np.float64) for d in self.details))
        object.__setattr__(self, "wavelet_id", WaveletId(self.wavelet_id))
        if self.levels != len(self.details):
            raise WaveletError(f"levels={self.levels} but {len(self.details)} detail bands")

    def bands(self) -> List[np.ndarray]:
        return [self.approx, *self.details]

    def energy(self) -> float:
        """Sum of squared coefficients over all bands"""
        return float(sum(np.sum(band ** 2) for band in self.bands()))

    def map_details(self, fn) -> "WaveletDecomposition":
        return WaveletDecomposition(
            approx=self.approx.copy(),
            details=tuple(fn(d) for d in self.details),
            levels=self.levels,
            original_len=self.original_len,
            wavelet_id=self.wavelet_id,
        )


def max_levels(length: int, wavelet_id: Union[WaveletId, str]) -> int:
    """floor(log2(length / (filter_len - 1))), or 0 when the signal is too short"""
    wavelet = pywt.Wavelet(WaveletId(wavelet_id).value)
    return pywt.dwt_max_level(int(length), wavelet.dec_len)


def expected_band_lengths(length: int, wavelet_id: Union[WaveletId, str], levels: int) -> List[int]:
    """Detail band lengths finest-to-coarsest; the approximation matches the last one"""
    wavelet = pywt.Wavelet(WaveletId(wavelet_id).value)
    lengths = []
    n = int(length)
    for _ in range(levels):
        n = pywt.dwt_coeff_len(n, wavelet.dec_len, BOUNDARY_MODE)
        lengths.append(n)
    return lengths


def dwt_forward(signal: Sequence[float], wavelet_id: Union[WaveletId, str], levels: int) -> WaveletDecomposition:
    """Multi-level DWT of a 1-D signal"""
    # pywt needs a writable buffer; Trace samples are read-only
    x = np.array(signal, dtype=np.float64).reshape(-1)
    wid = WaveletId(wavelet_id)
    if x.size < 2:
        raise WaveletError(f"signal too short: {x.size} samples (need at least 2)")
    bound = max_levels(x.size, wid)
    if levels < 1 or levels > bound:
        raise WaveletError(
            f"signal too short for {levels} levels of {wid.value}: length {x.size} allows 1..{bound}"
        )
    coeffs = pywt.wavedec(x, wid.value, mode=BOUNDARY_MODE, level=levels)
    return WaveletDecomposition(
        approx=coeffs[0],
        details=tuple(reversed(coeffs[1:])),
        levels=levels,
        original_len=int(x.size),
        wavelet_id=wid,
    )


def dwt_inverse(decomp: WaveletDecomposition) -> np.ndarray:
    """Inverse DWT, trimmed to the original signal length"""
    expected = expected_band_lengths(decomp.original_len, decomp.wavelet_id, decomp.levels)
    actual = [d.size for d in decomp.details]
    if actual != expected or decomp.approx.size != expected[-1]:
        raise WaveletError(
            f"inconsistent band lengths: details {actual}, approx {decomp.approx.size}; "
            f"expected {expected} for length {decomp.original_len}"
        )
    coeffs = [decomp.approx, *reversed(decomp.details)]
    out = pywt.waverec(coeffs, decomp.wavelet_id.value, mode=BOUNDARY_MODE)
    return np.asarray(out[: decomp.original_len], dtype=np.float64)


def estimate_noise_sigma(decomp: WaveletDecomposition) -> float:
    """MAD noise estimate from the finest detail band"""
    if not decomp.details or decomp.details[0].size == 0:
        raise WaveletError("empty finest detail band")
    return float(np.median(np.abs(decomp.details[0])) / MAD_NORMALIZER)


def threshold_value(decomp: WaveletDecomposition, config: DenoiseConfig) -> float:
    if config.threshold_rule == "universal":
        sigma = estimate_noise_sigma(decomp)
        return sigma * math.sqrt(2.0 * math.log(decomp.original_len))
    return float(config.threshold_rule)


def threshold_coefficients(decomp: WaveletDecomposition, config: DenoiseConfig) -> WaveletDecomposition:
    """Zero (hard) or shrink (soft) detail coefficients below the threshold"""
    tau = threshold_value(decomp, config)
    if tau < 0:
        raise WaveletError(f"negative threshold: {tau}")
    if tau == 0:
        return decomp.map_details(np.copy)
    return decomp.map_details(lambda d: pywt.threshold(d, tau, mode=config.threshold_mode))


def denoise(trace: Trace, config: DenoiseConfig) -> Trace:
    """Forward DWT -> threshold -> inverse DWT on one trace"""
    decomp = dwt_forward(trace.samples, config.wavelet_id, config.levels)
    cleaned = threshold_coefficients(decomp, config)
    if logging.getLogger().isEnabledFor(logging.DEBUG):
        logging.debug(
            "[Denoise] %s L=%d: tau=%.4g, energy %.4g -> %.4g",
            config.wavelet_id.value, config.levels,
            threshold_value(decomp, config), decomp.energy(), cleaned.energy(),
        )
    return trace.with_samples(dwt_inverse(cleaned))
