from typing import Any, TypedDict, List, Dict, Optional
from datetime import datetime


class FoldResult(TypedDict):
    """Outcome of one train/test split"""
    fold: int
    n_train: int
    n_test: int
    accuracy: float
    confusion: Any  # 8x8 row-normalized ndarray
    tested_classes: Any  # bool per class: was it present in this test fold?


class CrossValState(TypedDict):
    """Complete state for one cross-validation run"""
    # Input
    dataset: Any  # trace_model.Dataset
    pipeline: Any  # segmentation.PipelineConfig
    knn: Any  # knn_classifier.KnnConfig
    fold_plan: Any  # evaluators.FoldPlan
    max_workers: int

    # Preprocessing
    features: Dict[int, Any]  # trace index -> FeatureVector
    excluded: List[int]
    exclusion_reasons: Dict[int, str]

    # Folds
    fold_results: List[FoldResult]

    # Result
    report: Optional[Any]  # evaluators.EvalReport

    # Metadata
    run_id: str
    start_time: str
    end_time: Optional[str]


def create_initial_state(
    dataset,
    pipeline,
    knn,
    fold_plan,
    run_id: str,
    max_workers: int = 4
) -> CrossValState:
    """Factory for initial state"""
    return CrossValState(
        dataset=dataset,
        pipeline=pipeline,
        knn=knn,
        fold_plan=fold_plan,
        max_workers=max_workers,
        features={},
        excluded=[],
        exclusion_reasons={},
        fold_results=[],
        report=None,
        run_id=run_id,
        start_time=datetime.now().isoformat(),
        end_time=None
    )
