"""
Plot-ready CSV emitters

- trace-stages: one trace through every preprocessing block
  (t, raw, denoised, segmented_padded, standardized)
- distance-accuracy: one row per cross-validation report
  (distance_cm, ambient_on, mean_accuracy, sd)

Frames are written with pandas' default float rendering (shortest round-trip
repr), so the same inputs give byte-identical files.
"""

from typing import Sequence

import numpy as np
import pandas as pd

from evaluators import EvalReport
from segmentation import SegmentConfig, preprocess_stages
from trace_model import Trace
from wavelet_denoise import DenoiseConfig

PLOT_KINDS = ("trace-stages", "distance-accuracy")


class PlotDataError(ValueError):
    """Missing or unusable plot inputs"""


def _column(values: np.ndarray, rows: int) -> np.ndarray:
    """values followed by NaN (an empty cell) up to rows"""
    out = np.full(rows, np.nan)
    out[: len(values)] = values
    return out


def _to_csv_bytes(frame: pd.DataFrame) -> bytes:
    return frame.to_csv(index=False, lineterminator="\n", na_rep="").encode("utf-8")


def trace_stages_csv(trace: Trace, denoise_cfg: DenoiseConfig, seg_cfg: SegmentConfig) -> bytes:
    stages = preprocess_stages(trace, denoise_cfg, seg_cfg)
    rows = max(len(stages.raw), len(stages.padded))
    frame = pd.DataFrame({
        "t": np.arange(rows) / trace.meta.sample_rate_hz,
        "raw": _column(stages.raw, rows),
        "denoised": _column(stages.denoised, rows),
        "segmented_padded": _column(stages.padded, rows),
        "standardized": _column(stages.standardized, rows),
    })
    return _to_csv_bytes(frame)


def distance_accuracy_csv(reports: Sequence[EvalReport]) -> bytes:
    if not reports:
        raise PlotDataError("distance-accuracy needs at least one report")
    for index, report in enumerate(reports):
        if report.distance_cm is None or report.ambient_on is None:
            raise PlotDataError(f"report {index} covers mixed distances or ambient conditions")
    frame = pd.DataFrame({
        "distance_cm": [float(r.distance_cm) for r in reports],
        "ambient_on": [int(bool(r.ambient_on)) for r in reports],
        "mean_accuracy": [float(r.mean_accuracy) for r in reports],
        "sd": [float(r.accuracy_sd) for r in reports],
    })
    return _to_csv_bytes(frame)


def plotdata(kind: str, inputs: Sequence, denoise_cfg: DenoiseConfig = None, seg_cfg: SegmentConfig = None) -> bytes:
    """Dispatch on kind; inputs are traces (trace-stages) or reports (distance-accuracy)"""
    if kind == "trace-stages":
        if not inputs:
            raise PlotDataError("trace-stages needs a trace")
        return trace_stages_csv(inputs[0], denoise_cfg or DenoiseConfig(), seg_cfg or SegmentConfig())
    if kind == "distance-accuracy":
        return distance_accuracy_csv(list(inputs))
    raise PlotDataError(f"Unknown plot kind: {kind}")
