from langgraph.graph import StateGraph, START, END
import asyncio
import logging
import uuid
from datetime import datetime

from config import Config
from state import CrossValState, FoldResult, create_initial_state
from evaluators import CrossValEvaluator, EvalReport, EvaluationError, FoldPlan
from knn_classifier import KnnConfig, fit, predict_batch
from segmentation import PipelineConfig, preprocess
from trace_model import Dataset


class CrossValidationGraph:
    """LangGraph workflow: preprocess every trace, evaluate folds in parallel, reduce"""

    def __init__(self, max_workers: int = None):
        self.max_workers = max_workers or Config.MAX_WORKERS
        self.graph = self._build_graph()
        self.compiled = self.graph.compile()

    def _build_graph(self) -> StateGraph:
        workflow = StateGraph(CrossValState)

        # Nodes
        workflow.add_node("preprocess_traces", self._preprocess_traces)
        workflow.add_node("parallel_fold_eval", self._parallel_fold_eval)
        workflow.add_node("aggregate_report", self._aggregate_report)

        # Edges
        workflow.add_edge(START, "preprocess_traces")
        workflow.add_edge("preprocess_traces", "parallel_fold_eval")
        workflow.add_edge("parallel_fold_eval", "aggregate_report")
        workflow.add_edge("aggregate_report", END)

        return workflow

    def _preprocess_traces(self, state: CrossValState) -> dict:
        """Per-trace preprocessing; nothing here looks at other traces"""
        pipeline: PipelineConfig = state['pipeline']
        features, excluded, reasons = {}, [], {}

        for index, trace in enumerate(state['dataset']):
            try:
                features[index] = preprocess(trace, pipeline.denoise, pipeline.segment)
            except ValueError as e:
                excluded.append(index)
                reasons[index] = str(e)
                logging.warning(f"[CrossVal] Excluding trace {index} ({trace.label.letter}): {e}")

        logging.info(f"[CrossVal] Preprocessed {len(features)} traces, excluded {len(excluded)}")
        return {
            "features": features,
            "excluded": excluded,
            "exclusion_reasons": reasons
        }

    def _evaluate_fold(self, state: CrossValState, fold: int) -> FoldResult:
        plan: FoldPlan = state['fold_plan']
        knn: KnnConfig = state['knn']
        features = state['features']

        train = [features[i] for i in plan.train_indices(fold) if i in features]
        test = [features[i] for i in plan.test_indices(fold) if i in features]
        if not test:
            raise EvaluationError(f"fold {fold}: no usable test traces")

        try:
            model = fit(train, k=knn.k, metric=knn.metric)
            predictions = predict_batch(model, test)
        except ValueError as e:
            raise EvaluationError(f"fold {fold}: {e}") from e

        y_true = [int(fv.label) for fv in test]
        y_pred = [int(p.label) for p in predictions]
        counts = CrossValEvaluator.fold_counts(y_true, y_pred)
        accuracy = CrossValEvaluator.fold_accuracy(y_true, y_pred)

        logging.info(f"[CrossVal] Fold {fold}: {len(test)} test / {len(train)} train, accuracy {accuracy:.4f}")
        return FoldResult(
            fold=fold,
            n_train=len(train),
            n_test=len(test),
            accuracy=accuracy,
            confusion=CrossValEvaluator.row_normalize(counts),
            tested_classes=counts.sum(axis=1) > 0
        )

    async def _parallel_fold_eval(self, state: CrossValState) -> dict:
        """Run all folds concurrently on worker threads"""
        limit = asyncio.Semaphore(max(1, state['max_workers']))

        async def run_fold(fold: int) -> FoldResult:
            async with limit:
                return await asyncio.to_thread(self._evaluate_fold, state, fold)

        tasks = [asyncio.create_task(run_fold(f)) for f in range(state['fold_plan'].K)]
        results = await asyncio.gather(*tasks)

        # reduction order is fold order, whatever finished first
        return {"fold_results": sorted(results, key=lambda r: r['fold'])}

    def _aggregate_report(self, state: CrossValState) -> dict:
        results = state['fold_results']
        per_fold = tuple(r['accuracy'] for r in results)
        mean, sd = CrossValEvaluator.accuracy_stats(per_fold)
        mean_confusion = CrossValEvaluator.average_confusions(
            [r['confusion'] for r in results],
            [r['tested_classes'] for r in results]
        )

        dataset: Dataset = state['dataset']
        distance, ambient = dataset.condition()
        plan: FoldPlan = state['fold_plan']
        knn: KnnConfig = state['knn']

        report = EvalReport(
            mean_confusion=mean_confusion,
            per_fold_accuracy=per_fold,
            mean_accuracy=mean,
            accuracy_sd=sd,
            excluded=len(state['excluded']),
            excluded_indices=tuple(state['excluded']),
            n_traces=len(dataset),
            distance_cm=distance,
            ambient_on=ambient,
            k=knn.k,
            metric=knn.metric,
            folds=plan.K,
            seed=plan.seed,
            stratified=plan.stratified,
            pipeline=state['pipeline'].model_dump(mode="json")
        )
        logging.info(f"[CrossVal] Run {state['run_id']}: mean accuracy {mean:.4f} (SD {sd:.4f})")
        return {
            "report": report,
            "end_time": datetime.now().isoformat()
        }

    async def invoke_async(
        self,
        dataset: Dataset,
        pipeline: PipelineConfig,
        knn: KnnConfig,
        fold_plan: FoldPlan
    ) -> CrossValState:
        if len(fold_plan) != len(dataset):
            raise EvaluationError(
                f"fold plan covers {len(fold_plan)} samples but the dataset has {len(dataset)}"
            )
        run_id = str(uuid.uuid4())[:8]
        state = create_initial_state(dataset, pipeline, knn, fold_plan, run_id, self.max_workers)
        return await self.compiled.ainvoke(state)

    def invoke(self, dataset, pipeline, knn, fold_plan) -> CrossValState:
        return asyncio.run(self.invoke_async(dataset, pipeline, knn, fold_plan))


def cross_validate(
    ds: Dataset,
    pipeline_cfg: PipelineConfig,
    knn_cfg: KnnConfig,
    fold_plan: FoldPlan,
    max_workers: int = None
) -> EvalReport:
    """K-fold evaluation; traces failing preprocessing are excluded and counted"""
    result = CrossValidationGraph(max_workers).invoke(ds, pipeline_cfg, knn_cfg, fold_plan)
    return result['report']
