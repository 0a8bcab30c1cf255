"""
K-nearest-neighbors gesture classifier

Lazy learner over standardized feature vectors. Neighbor search is exact brute
force. Tie policy, fully deterministic:
- equal distances: lower training index first
- equal vote counts: smaller summed neighbor distance, then lower label ordinal
"""

import json
import logging
from dataclasses import dataclass
from typing import Any, Dict, List, Literal, NamedTuple, Optional, Sequence, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, Field
from scipy.spatial.distance import cdist

from file_io import PathLike, atomic_write_text
from segmentation import FeatureVector
from trace_model import N_CLASSES, GestureLabel

Metric = Literal["euclidean", "manhattan"]

_SCIPY_METRIC = {"euclidean": "euclidean", "manhattan": "cityblock"}


class KnnError(ValueError):
    """Invalid model, hyperparameter or query"""


class KnnConfig(BaseModel):
    model_config = ConfigDict(frozen=True)

    k: int = Field(default=5, ge=1)
    metric: Metric = "euclidean"


@dataclass(frozen=True, eq=False)
class KnnModel:
    """Stored training set plus k and metric"""
    vectors: np.ndarray  # (n, d)
    labels: np.ndarray   # (n,) label ordinals
    k: int
    metric: Metric

    def __len__(self) -> int:
        return int(self.labels.size)

    @property
    def dim(self) -> int:
        return int(self.vectors.shape[1])


@dataclass(frozen=True)
class Prediction:
    label: GestureLabel
    neighbor_labels: Tuple[GestureLabel, ...]
    vote_counts: Tuple[int, ...]  # indexed by label ordinal
    neighbor_indices: Tuple[int, ...]
    neighbor_distances: Tuple[float, ...]


class ModelFile(NamedTuple):
    model: KnnModel
    pipeline: Optional[Dict[str, Any]]


def _as_vector(query) -> np.ndarray:
    values = query.values if isinstance(query, FeatureVector) else query
    return np.asarray(values, dtype=np.float64).reshape(-1)


def fit(training: Sequence[FeatureVector], k: int = 5, metric: Metric = "euclidean") -> KnnModel:
    """Validate and store the training set; no numeric fitting happens"""
    if metric not in _SCIPY_METRIC:
        raise KnnError(f"Unknown metric: {metric}")
    if not training:
        raise KnnError("training set is empty")
    lengths = {len(fv) for fv in training}
    if len(lengths) != 1:
        raise KnnError(f"mixed training vector lengths: {sorted(lengths)}")
    if any(fv.label is None for fv in training):
        raise KnnError("every training vector needs a label")
    if not 1 <= k <= len(training):
        raise KnnError(f"k={k} out of range for {len(training)} training vectors")

    vectors = np.vstack([fv.values for fv in training])
    labels = np.array([int(fv.label) for fv in training], dtype=np.int64)
    vectors.flags.writeable = False
    labels.flags.writeable = False
    logging.debug(f"[KNN] Fitted k={k} metric={metric} on {len(training)} vectors of length {vectors.shape[1]}")
    return KnnModel(vectors=vectors, labels=labels, k=int(k), metric=metric)


def distances(model: KnnModel, query) -> np.ndarray:
    q = _as_vector(query)
    if q.size != model.dim:
        raise KnnError(f"query length {q.size} does not match training length {model.dim}")
    return cdist(q[np.newaxis, :], model.vectors, metric=_SCIPY_METRIC[model.metric])[0]


def predict(model: KnnModel, query) -> Prediction:
    """Majority vote among the k nearest training vectors"""
    dist = distances(model, query)
    order = np.argsort(dist, kind="stable")[: model.k]
    neighbor_labels = model.labels[order]
    votes = np.bincount(neighbor_labels, minlength=N_CLASSES)

    tied = np.flatnonzero(votes == votes.max())
    if tied.size == 1:
        winner = int(tied[0])
    else:
        summed = np.zeros(N_CLASSES)
        np.add.at(summed, neighbor_labels, dist[order])
        # argmin keeps the lowest ordinal among equal sums
        winner = int(tied[np.argmin(summed[tied])])

    return Prediction(
        label=GestureLabel(winner),
        neighbor_labels=tuple(GestureLabel(int(l)) for l in neighbor_labels),
        vote_counts=tuple(int(v) for v in votes),
        neighbor_indices=tuple(int(i) for i in order),
        neighbor_distances=tuple(float(d) for d in dist[order]),
    )


def predict_batch(model: KnnModel, queries: Sequence) -> List[Prediction]:
    """predict() per query, in order"""
    if not len(queries):
        return []
    lengths = {_as_vector(q).size for q in queries}
    if len(lengths) != 1:
        raise KnnError(f"mixed query lengths: {sorted(lengths)}")
    return [predict(model, q) for q in queries]


# ============================================================================
# Model files
# ============================================================================

def save_model(model: KnnModel, path: PathLike, pipeline: Optional[Dict[str, Any]] = None) -> None:
    """JSON with k, metric, the preprocessing settings and the training set"""
    payload = {
        "k": model.k,
        "metric": model.metric,
        "pipeline": pipeline,
        "training": [
            {"label": GestureLabel(int(label)).letter, "values": [float(v) for v in row]}
            for row, label in zip(model.vectors, model.labels)
        ],
    }
    atomic_write_text(path, json.dumps(payload) + "\n")
    logging.info(f"[KNN] Saved model ({len(model)} vectors, k={model.k}) to {path}")


def load_model(path: PathLike) -> ModelFile:
    try:
        with open(path, encoding="utf-8") as handle:
            payload = json.load(handle)
        training = [
            FeatureVector(values=item["values"], label=GestureLabel[item["label"].upper()])
            for item in payload["training"]
        ]
        model = fit(training, k=int(payload["k"]), metric=payload["metric"])
    except (KeyError, TypeError, AttributeError, json.JSONDecodeError) as e:
        raise KnnError(f"malformed model file {path}: {e}") from e
    return ModelFile(model=model, pipeline=payload.get("pipeline"))
