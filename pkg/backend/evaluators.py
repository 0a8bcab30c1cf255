"""
Cross-validation evaluators

Fold planning, per-fold confusion matrices and accuracies, their aggregation
into an EvalReport, and report rendering/persistence. The cross-validation
workflow that drives these lives in graph.py.
"""

import json
import logging
from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd
from sklearn.metrics import accuracy_score, confusion_matrix
from sklearn.model_selection import KFold, StratifiedKFold

from file_io import PathLike, atomic_write_bytes
from trace_model import N_CLASSES, Dataset, GestureLabel

ROW_SUM_TOLERANCE = 1e-6
REPORT_FORMATS = ("text", "csv", "json")


class FoldPlanError(ValueError):
    """Fold plan cannot be built for this dataset"""


class EvaluationError(ValueError):
    """A cross-validation fold could not be evaluated"""


# ============================================================================
# Fold plans
# ============================================================================

@dataclass(frozen=True, eq=False)
class FoldPlan:
    """Fold index per sample, 0..K-1"""
    assignments: np.ndarray
    K: int
    seed: int
    stratified: bool

    def __post_init__(self):
        assignments = np.array(self.assignments, dtype=np.int64, copy=True).reshape(-1)
        assignments.flags.writeable = False
        object.__setattr__(self, "assignments", assignments)
        if self.K < 2:
            raise FoldPlanError(f"K must be at least 2, got {self.K}")
        if assignments.size and (assignments.min() < 0 or assignments.max() >= self.K):
            raise FoldPlanError(f"fold indices must lie in 0..{self.K - 1}")

    def __len__(self) -> int:
        return int(self.assignments.size)

    def test_indices(self, fold: int) -> np.ndarray:
        return np.flatnonzero(self.assignments == fold)

    def train_indices(self, fold: int) -> np.ndarray:
        return np.flatnonzero(self.assignments != fold)

    def fold_sizes(self) -> np.ndarray:
        return np.bincount(self.assignments, minlength=self.K)


def _seeded_random_state(seed: int) -> np.random.RandomState:
    """64-bit seed -> legacy RandomState, as scikit-learn splitters expect"""
    return np.random.RandomState(np.random.SeedSequence(int(seed) & (2 ** 64 - 1)).generate_state(4))


def make_folds(ds: Dataset, K: int = 10, seed: int = 0, stratified: bool = True) -> FoldPlan:
    """Seeded random K-fold assignment, balanced per class when stratified"""
    n = len(ds)
    if K < 2:
        raise FoldPlanError(f"K must be at least 2, got {K}")
    if K > n:
        raise FoldPlanError(f"K={K} is larger than the dataset ({n} traces)")

    labels = ds.labels()
    placeholder = np.zeros((n, 1))
    if stratified:
        counts = np.bincount(labels, minlength=N_CLASSES)
        small = [GestureLabel(c).letter for c in np.flatnonzero((counts > 0) & (counts < K))]
        if small:
            raise FoldPlanError(f"class(es) {', '.join(small)} have fewer than K={K} samples for stratification")
        splitter = StratifiedKFold(n_splits=K, shuffle=True, random_state=_seeded_random_state(seed))
        splits = splitter.split(placeholder, labels)
    else:
        splitter = KFold(n_splits=K, shuffle=True, random_state=_seeded_random_state(seed))
        splits = splitter.split(placeholder)

    assignments = np.full(n, -1, dtype=np.int64)
    for fold, (_, test_idx) in enumerate(splits):
        assignments[test_idx] = fold
    plan = FoldPlan(assignments=assignments, K=K, seed=int(seed), stratified=stratified)
    logging.debug(f"[CrossVal] Fold sizes: {plan.fold_sizes().tolist()}")
    return plan


# ============================================================================
# Confusion matrices and reports
# ============================================================================

@dataclass(frozen=True, eq=False)
class ConfusionMatrix:
    """8x8 row-normalized frequencies; rows performed, columns estimated.

    Rows of classes that were never tested stay all-zero."""
    rows: np.ndarray

    def __post_init__(self):
        rows = np.array(self.rows, dtype=np.float64, copy=True)
        if rows.shape != (N_CLASSES, N_CLASSES):
            raise EvaluationError(f"confusion matrix must be {N_CLASSES}x{N_CLASSES}, got {rows.shape}")
        if np.any(rows < 0):
            raise EvaluationError("confusion matrix has negative entries")
        sums = rows.sum(axis=1)
        bad = np.flatnonzero((np.abs(sums - 1.0) > ROW_SUM_TOLERANCE) & (sums != 0))
        if bad.size:
            raise EvaluationError(f"confusion row {GestureLabel(int(bad[0])).letter} sums to {sums[bad[0]]}")
        rows.flags.writeable = False
        object.__setattr__(self, "rows", rows)

    @property
    def diagonal(self) -> np.ndarray:
        return np.diag(self.rows).copy()

    @classmethod
    def identity(cls) -> "ConfusionMatrix":
        return cls(np.eye(N_CLASSES))


@dataclass(frozen=True, eq=False)
class EvalReport:
    mean_confusion: ConfusionMatrix
    per_fold_accuracy: Tuple[float, ...]
    mean_accuracy: float
    accuracy_sd: float
    excluded: int = 0
    excluded_indices: Tuple[int, ...] = ()
    n_traces: int = 0
    distance_cm: Optional[float] = None
    ambient_on: Optional[bool] = None
    k: Optional[int] = None
    metric: Optional[str] = None
    folds: Optional[int] = None
    seed: Optional[int] = None
    stratified: Optional[bool] = None
    pipeline: Optional[Dict[str, Any]] = field(default=None)

    @property
    def per_class_accuracy(self) -> np.ndarray:
        return self.mean_confusion.diagonal


class CrossValEvaluator:
    """Scores folds and reduces them into a report"""

    @staticmethod
    def fold_counts(y_true: Sequence[int], y_pred: Sequence[int]) -> np.ndarray:
        return confusion_matrix(y_true, y_pred, labels=list(range(N_CLASSES)))

    @staticmethod
    def row_normalize(counts: np.ndarray) -> np.ndarray:
        counts = np.asarray(counts, dtype=np.float64)
        sums = counts.sum(axis=1, keepdims=True)
        return np.divide(counts, sums, out=np.zeros_like(counts), where=sums > 0)

    @staticmethod
    def fold_accuracy(y_true: Sequence[int], y_pred: Sequence[int]) -> float:
        return float(accuracy_score(y_true, y_pred))

    @staticmethod
    def average_confusions(fold_matrices: Sequence[np.ndarray], tested: Sequence[np.ndarray]) -> ConfusionMatrix:
        """Element-wise mean of per-fold matrices, each row over the folds that tested that class"""
        stacked = np.stack([np.asarray(m, dtype=np.float64) for m in fold_matrices])
        mask = np.stack([np.asarray(t, dtype=bool) for t in tested]).astype(np.float64)
        n_tested = mask.sum(axis=0)
        summed = np.einsum("fij,fi->ij", stacked, mask)
        mean = np.divide(summed, n_tested[:, None], out=np.zeros_like(summed), where=n_tested[:, None] > 0)
        return ConfusionMatrix(mean)

    @staticmethod
    def accuracy_stats(per_fold: Sequence[float]) -> Tuple[float, float]:
        """Mean and sample standard deviation over folds"""
        values = np.asarray(per_fold, dtype=np.float64)
        mean = float(np.mean(values))
        sd = float(np.std(values, ddof=1)) if values.size > 1 else 0.0
        return mean, sd


def format_accuracy(mean: float, sd: float) -> str:
    return f"{mean * 100:.2f}% (SD = {sd * 100:.2f}%)"


def report_to_dict(report: EvalReport) -> Dict[str, Any]:
    letters = GestureLabel.letters()
    return {
        "mean_accuracy": report.mean_accuracy,
        "accuracy_sd": report.accuracy_sd,
        "per_fold_accuracy": [float(a) for a in report.per_fold_accuracy],
        "per_class_accuracy": {letter: float(v) for letter, v in zip(letters, report.per_class_accuracy)},
        "mean_confusion": {
            "labels": letters,
            "rows": [[float(v) for v in row] for row in report.mean_confusion.rows],
        },
        "excluded": report.excluded,
        "excluded_indices": list(report.excluded_indices),
        "n_traces": report.n_traces,
        "condition": {"distance_cm": report.distance_cm, "ambient_on": report.ambient_on},
        "knn": {"k": report.k, "metric": report.metric},
        "folds": report.folds,
        "seed": report.seed,
        "stratified": report.stratified,
        "pipeline": report.pipeline,
    }


def report_from_dict(data: Dict[str, Any]) -> EvalReport:
    try:
        condition = data.get("condition") or {}
        knn = data.get("knn") or {}
        return EvalReport(
            mean_confusion=ConfusionMatrix(data["mean_confusion"]["rows"]),
            per_fold_accuracy=tuple(float(a) for a in data["per_fold_accuracy"]),
            mean_accuracy=float(data["mean_accuracy"]),
            accuracy_sd=float(data["accuracy_sd"]),
            excluded=int(data.get("excluded", 0)),
            excluded_indices=tuple(int(i) for i in data.get("excluded_indices", [])),
            n_traces=int(data.get("n_traces", 0)),
            distance_cm=condition.get("distance_cm"),
            ambient_on=condition.get("ambient_on"),
            k=knn.get("k"),
            metric=knn.get("metric"),
            folds=data.get("folds"),
            seed=data.get("seed"),
            stratified=data.get("stratified"),
            pipeline=data.get("pipeline"),
        )
    except (KeyError, TypeError) as e:
        raise EvaluationError(f"malformed report: missing or invalid {e}") from e


def _render_text(report: EvalReport) -> str:
    letters = GestureLabel.letters()
    lines = ["Mean confusion matrix (rows: performed gesture, columns: estimated gesture)"]
    lines.append("     " + "".join(f"{letter:>6}" for letter in letters))
    for letter, row in zip(letters, report.mean_confusion.rows):
        lines.append(f"  {letter}  " + "".join(f"{v:6.2f}" for v in row))
    lines.append("")
    lines.append(f"Accuracy: {format_accuracy(report.mean_accuracy, report.accuracy_sd)}")
    lines.append("Per-fold accuracy: " + " ".join(f"{a:.4f}" for a in report.per_fold_accuracy))
    lines.append(f"Excluded traces: {report.excluded}")
    return "\n".join(lines) + "\n"


def _render_csv(report: EvalReport) -> str:
    letters = GestureLabel.letters()
    rows = [
        ("mean_accuracy", None, None, float(report.mean_accuracy)),
        ("accuracy_sd", None, None, float(report.accuracy_sd)),
        ("excluded", None, None, int(report.excluded)),
    ]
    rows += [("fold_accuracy", fold, None, float(acc)) for fold, acc in enumerate(report.per_fold_accuracy)]
    rows += [
        ("confusion", performed, estimated, float(report.mean_confusion.rows[i, j]))
        for i, performed in enumerate(letters)
        for j, estimated in enumerate(letters)
    ]
    # object columns keep ints as ints and floats in their round-trip repr
    frame = pd.DataFrame(rows, columns=["kind", "row", "col", "value"], dtype=object)
    return frame.to_csv(index=False, lineterminator="\n", na_rep="")


def render_report(report: EvalReport, format: str = "text") -> bytes:
    """Table-style text, long-form CSV, or the full JSON document"""
    if format == "text":
        return _render_text(report).encode("utf-8")
    if format == "csv":
        return _render_csv(report).encode("utf-8")
    if format == "json":
        return (json.dumps(report_to_dict(report), indent=2) + "\n").encode("utf-8")
    raise ValueError(f"Unknown report format: {format}")


def save_report(report: EvalReport, path: PathLike, format: str = "json") -> None:
    atomic_write_bytes(path, render_report(report, format))
    logging.info(f"[CrossVal] Wrote {format} report to {path}")


def load_report(path: PathLike) -> EvalReport:
    with open(path, encoding="utf-8") as handle:
        try:
            data = json.load(handle)
        except json.JSONDecodeError as e:
            raise EvaluationError(f"report {path} is not JSON: {e}") from e
    return report_from_dict(data)
