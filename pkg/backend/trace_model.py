"""
Trace data model

Core types for light-intensity recordings (traces), the 8-gesture label set,
acquisition metadata and labeled datasets, plus CSV/JSON dataset files.

A trace is one fixed-duration record of received intensity, 6 s at 100 Hz by
default (600 samples). Labels serialize as the letters "a".."h".
"""

import csv
import io
import json
import logging
import math
from dataclasses import dataclass, field, replace
from enum import IntEnum
from pathlib import Path
from typing import Iterator, List, Optional, Sequence, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, ValidationError

from file_io import PathLike, atomic_write_text

DEFAULT_SAMPLE_RATE_HZ = 100.0
DEFAULT_DURATION_S = 6.0

CSV_META_COLUMNS = ["label", "distance_cm", "ambient_on", "sample_rate_hz", "n_samples"]


class DatasetError(ValueError):
    """Base class for dataset problems"""


class DatasetFormatError(DatasetError):
    """File content does not follow the dataset format"""


class DatasetValidationError(DatasetError):
    """Parsed content violates a trace or dataset invariant"""


class GestureLabel(IntEnum):
    """The 8 gesture classes; ordinals are fixed and stable on disk"""
    A = 0
    B = 1
    C = 2
    D = 3
    E = 4
    F = 5
    G = 6
    H = 7

    @property
    def letter(self) -> str:
        return self.name.lower()

    @classmethod
    def from_letter(cls, letter: str) -> "GestureLabel":
        key = str(letter).strip().upper()
        if len(key) != 1 or key not in cls.__members__:
            raise DatasetValidationError(f"unknown label '{letter}'")
        return cls[key]

    @classmethod
    def letters(cls) -> List[str]:
        return [label.letter for label in cls]


N_CLASSES = len(GestureLabel)


class AcquisitionMeta(BaseModel):
    """How a trace was recorded"""
    model_config = ConfigDict(frozen=True)

    distance_cm: float = Field(gt=0, allow_inf_nan=False)
    ambient_on: bool
    sample_rate_hz: float = Field(default=DEFAULT_SAMPLE_RATE_HZ, gt=0, allow_inf_nan=False)
    duration_s: float = Field(default=DEFAULT_DURATION_S, gt=0, allow_inf_nan=False)

    @property
    def n_samples(self) -> int:
        return int(round(self.sample_rate_hz * self.duration_s))


@dataclass(frozen=True, eq=False)
class Trace:
    """One recording; samples are stored as a read-only float64 array"""
    samples: np.ndarray
    meta: AcquisitionMeta
    label: Optional[GestureLabel] = None

    def __post_init__(self):
        samples = np.array(self.samples, dtype=np.float64, copy=True).reshape(-1)
        if samples.size != self.meta.n_samples:
            raise DatasetValidationError(
                f"length mismatch: {samples.size} samples but metadata implies {self.meta.n_samples}"
            )
        if not np.all(np.isfinite(samples)):
            bad = int(np.flatnonzero(~np.isfinite(samples))[0])
            raise DatasetValidationError(f"non-finite sample at index {bad}")
        samples.flags.writeable = False
        object.__setattr__(self, "samples", samples)
        if self.label is not None and not isinstance(self.label, GestureLabel):
            object.__setattr__(self, "label", GestureLabel(self.label))

    def __len__(self) -> int:
        return int(self.samples.size)

    @property
    def time_s(self) -> np.ndarray:
        return np.arange(len(self)) / self.meta.sample_rate_hz

    def with_samples(self, samples: Sequence[float]) -> "Trace":
        """Same metadata and label, new samples"""
        return replace(self, samples=np.asarray(samples, dtype=np.float64))


@dataclass(frozen=True, eq=False)
class Dataset:
    """Non-empty, fully labeled collection sharing one sample rate"""
    traces: Tuple[Trace, ...] = field(default_factory=tuple)

    def __post_init__(self):
        traces = tuple(self.traces)
        object.__setattr__(self, "traces", traces)
        if not traces:
            raise DatasetValidationError("empty dataset")
        rate = traces[0].meta.sample_rate_hz
        for index, trace in enumerate(traces):
            if trace.label is None:
                raise DatasetValidationError(f"record {index}: trace is unlabeled")
            if trace.meta.sample_rate_hz != rate:
                raise DatasetValidationError(
                    f"record {index}: sample rate {trace.meta.sample_rate_hz} Hz differs from {rate} Hz"
                )

    def __len__(self) -> int:
        return len(self.traces)

    def __iter__(self) -> Iterator[Trace]:
        return iter(self.traces)

    def __getitem__(self, index: int) -> Trace:
        return self.traces[index]

    @property
    def sample_rate_hz(self) -> float:
        return self.traces[0].meta.sample_rate_hz

    def labels(self) -> np.ndarray:
        """Label ordinals in record order"""
        return np.array([int(t.label) for t in self.traces], dtype=np.int64)

    def class_counts(self) -> np.ndarray:
        return np.bincount(self.labels(), minlength=N_CLASSES)

    def condition(self) -> Tuple[Optional[float], Optional[bool]]:
        """(distance_cm, ambient_on) when uniform across the set, else None per field"""
        distances = {t.meta.distance_cm for t in self.traces}
        ambients = {t.meta.ambient_on for t in self.traces}
        distance = distances.pop() if len(distances) == 1 else None
        ambient = ambients.pop() if len(ambients) == 1 else None
        return distance, ambient


# ============================================================================
# Dataset files
# ============================================================================

def _as_number(index: int, field_name: str, value) -> float:
    try:
        if isinstance(value, bool):
            raise TypeError
        number = float(value)
    except (TypeError, ValueError):
        raise DatasetFormatError(f"record {index}: {field_name} must be a number, got {value!r}") from None
    if not math.isfinite(number):
        raise DatasetValidationError(f"record {index}: {field_name} must be finite, got {value!r}")
    return number


def _build_trace(index: int, samples, label: str, distance_cm, ambient_on, sample_rate_hz) -> Trace:
    rate = _as_number(index, "sample_rate_hz", sample_rate_hz)
    distance_cm = _as_number(index, "distance_cm", distance_cm)
    try:
        n = len(samples)
        duration = n / rate if rate > 0 and math.isfinite(rate) else rate
        meta = AcquisitionMeta(
            distance_cm=distance_cm,
            ambient_on=ambient_on,
            sample_rate_hz=rate,
            duration_s=duration,
        )
        return Trace(samples=samples, meta=meta, label=GestureLabel.from_letter(label))
    except ValidationError as e:
        details = "; ".join(f"{'.'.join(str(p) for p in err['loc'])}: {err['msg']}" for err in e.errors())
        raise DatasetValidationError(f"record {index}: {details}") from e
    except DatasetValidationError as e:
        raise DatasetValidationError(f"record {index}: {e}") from e


def _parse_ambient(index: int, raw: str) -> bool:
    value = raw.strip()
    if value not in ("0", "1"):
        raise DatasetFormatError(f"row {index}: ambient_on must be 0 or 1, got '{raw}'")
    return value == "1"


def _parse_float(index: int, column: str, raw: str) -> float:
    try:
        return float(raw)
    except ValueError:
        raise DatasetFormatError(f"row {index}: column '{column}' is not a number: '{raw}'") from None


def _load_csv(text: str) -> List[Trace]:
    reader = csv.reader(io.StringIO(text))
    header = next(reader, None)
    if header is None or not any(cell.strip() for cell in header):
        raise DatasetValidationError("empty dataset")
    header = [cell.strip() for cell in header]
    if header[: len(CSV_META_COLUMNS)] != CSV_META_COLUMNS:
        raise DatasetFormatError(f"header must start with {','.join(CSV_META_COLUMNS)}")
    sample_columns = header[len(CSV_META_COLUMNS):]
    expected = [f"s{i}" for i in range(len(sample_columns))]
    if sample_columns != expected:
        raise DatasetFormatError("header sample columns must be s0..s{n-1}")
    width = len(header)

    traces = []
    for index, row in enumerate(reader):
        if not row or not any(cell.strip() for cell in row):
            continue
        if len(row) != width:
            raise DatasetFormatError(
                f"row {index}: expected {width} columns ({len(sample_columns)} samples), got {len(row)}"
            )
        label, distance, ambient, rate, n_declared = row[: len(CSV_META_COLUMNS)]
        samples = [_parse_float(index, f"s{j}", raw) for j, raw in enumerate(row[len(CSV_META_COLUMNS):])]
        try:
            n_samples = int(n_declared)
        except ValueError:
            raise DatasetFormatError(f"row {index}: n_samples is not an integer: '{n_declared}'") from None
        if n_samples != len(samples):
            raise DatasetValidationError(
                f"record {index}: length mismatch: n_samples={n_samples} but row holds {len(samples)} samples"
            )
        traces.append(_build_trace(
            index,
            samples,
            label,
            _parse_float(index, "distance_cm", distance),
            _parse_ambient(index, ambient),
            _parse_float(index, "sample_rate_hz", rate),
        ))
    return traces


def _load_json(text: str) -> List[Trace]:
    if not text.strip():
        raise DatasetValidationError("empty dataset")
    try:
        records = json.loads(text)
    except json.JSONDecodeError as e:
        raise DatasetFormatError(f"invalid JSON: {e}") from e
    if not isinstance(records, list):
        raise DatasetFormatError("JSON dataset must be an array of trace objects")

    traces = []
    for index, record in enumerate(records):
        if not isinstance(record, dict):
            raise DatasetFormatError(f"record {index}: expected an object")
        missing = [key for key in ("label", "distance_cm", "ambient_on", "sample_rate_hz", "samples") if key not in record]
        if missing:
            raise DatasetFormatError(f"record {index}: missing field(s) {', '.join(missing)}")
        samples = record["samples"]
        if not isinstance(samples, list) or not all(isinstance(v, (int, float)) and not isinstance(v, bool) for v in samples):
            raise DatasetFormatError(f"record {index}: samples must be an array of numbers")
        ambient = record["ambient_on"]
        if ambient not in (True, False, 0, 1):
            raise DatasetFormatError(f"record {index}: ambient_on must be a boolean")
        trace = _build_trace(
            index, samples, record["label"], record["distance_cm"], bool(ambient), record["sample_rate_hz"]
        )
        if "duration_s" in record and round(
            trace.meta.sample_rate_hz * _as_number(index, "duration_s", record["duration_s"])
        ) != len(trace):
            raise DatasetValidationError(
                f"record {index}: length mismatch: {len(trace)} samples for duration_s={record['duration_s']}"
            )
        traces.append(trace)
    return traces


def load_dataset(path: PathLike, format: str = "csv") -> Dataset:
    """Read and validate a dataset file, preserving row order"""
    text = Path(path).read_text(encoding="utf-8")
    if format == "csv":
        traces = _load_csv(text)
    elif format == "json":
        traces = _load_json(text)
    else:
        raise DatasetFormatError(f"Unknown dataset format: {format}")
    dataset = Dataset(tuple(traces))
    logging.info(f"[Dataset] Loaded {len(dataset)} traces from {path}")
    return dataset


def dumps_dataset(ds: Dataset, format: str = "csv") -> str:
    if format == "csv":
        n_max = max(len(t) for t in ds)
        buffer = io.StringIO()
        writer = csv.writer(buffer, lineterminator="\n")
        writer.writerow(CSV_META_COLUMNS + [f"s{i}" for i in range(n_max)])
        for index, trace in enumerate(ds):
            if len(trace) != n_max:
                raise DatasetFormatError(
                    f"record {index}: CSV needs uniform trace length ({len(trace)} != {n_max}); use json"
                )
            writer.writerow([
                trace.label.letter,
                repr(float(trace.meta.distance_cm)),
                "1" if trace.meta.ambient_on else "0",
                repr(float(trace.meta.sample_rate_hz)),
                str(len(trace)),
                *(repr(float(v)) for v in trace.samples),
            ])
        return buffer.getvalue()
    if format == "json":
        records = [
            {
                "label": trace.label.letter,
                "distance_cm": float(trace.meta.distance_cm),
                "ambient_on": bool(trace.meta.ambient_on),
                "sample_rate_hz": float(trace.meta.sample_rate_hz),
                "samples": [float(v) for v in trace.samples],
            }
            for trace in ds
        ]
        return json.dumps(records) + "\n"
    raise DatasetFormatError(f"Unknown dataset format: {format}")


def save_dataset(ds: Dataset, path: PathLike, format: str = "csv") -> None:
    """Write a dataset file atomically"""
    atomic_write_text(path, dumps_dataset(ds, format))
    logging.info(f"[Dataset] Saved {len(ds)} traces to {path} ({format})")
