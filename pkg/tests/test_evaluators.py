import json

import numpy as np
import pytest

from evaluators import (
    ConfusionMatrix,
    CrossValEvaluator,
    EvalReport,
    EvaluationError,
    FoldPlan,
    FoldPlanError,
    format_accuracy,
    load_report,
    make_folds,
    render_report,
    report_from_dict,
    report_to_dict,
    save_report,
)


def _report(**overrides) -> EvalReport:
    values = dict(
        mean_confusion=ConfusionMatrix.identity(),
        per_fold_accuracy=(1.0, 0.9, 0.95),
        mean_accuracy=0.95,
        accuracy_sd=0.05,
        excluded=1,
        excluded_indices=(17,),
        n_traces=30,
        distance_cm=20.0,
        ambient_on=True,
        k=5,
        metric="euclidean",
        folds=3,
        seed=1,
        stratified=True,
    )
    values.update(overrides)
    return EvalReport(**values)


# ============================================================================
# Fold plans
# ============================================================================

@pytest.mark.parametrize("stratified", [True, False])
def test_960_samples_make_ten_folds_of_96(make_dataset, stratified):
    ds = make_dataset(list("abcdefgh") * 120)
    plan = make_folds(ds, K=10, seed=3, stratified=stratified)
    assert plan.fold_sizes().tolist() == [96] * 10

    tested = np.concatenate([plan.test_indices(f) for f in range(10)])
    assert sorted(tested.tolist()) == list(range(960))
    for f in range(10):
        assert set(plan.test_indices(f)).isdisjoint(plan.train_indices(f))
        assert len(plan.train_indices(f)) == 864


def test_stratified_folds_balance_every_class(make_dataset):
    ds = make_dataset(list("abcdefgh") * 23)
    plan = make_folds(ds, K=10, seed=8)
    labels = ds.labels()
    for cls in range(8):
        per_fold = np.bincount(plan.assignments[labels == cls], minlength=10)
        assert per_fold.max() - per_fold.min() <= 1


def test_single_class_spreads_one_per_fold(make_dataset):
    plan = make_folds(make_dataset(["c"] * 10), K=10, seed=0)
    assert sorted(plan.assignments.tolist()) == list(range(10))


def test_fold_plan_is_seeded(make_dataset):
    ds = make_dataset(list("abcdefgh") * 20)
    a = make_folds(ds, K=10, seed=123)
    b = make_folds(ds, K=10, seed=123)
    c = make_folds(ds, K=10, seed=124)
    np.testing.assert_array_equal(a.assignments, b.assignments)
    assert not np.array_equal(a.assignments, c.assignments)


def test_large_seeds_are_accepted(make_dataset):
    ds = make_dataset(list("ab") * 10)
    plan = make_folds(ds, K=5, seed=2 ** 63 + 17)
    assert len(plan) == 20


def test_fold_plan_errors(make_dataset):
    ds = make_dataset(list("abcdefgh") * 3)
    with pytest.raises(FoldPlanError, match="at least 2"):
        make_folds(ds, K=1)
    with pytest.raises(FoldPlanError, match="larger than the dataset"):
        make_folds(ds, K=25, stratified=False)
    with pytest.raises(FoldPlanError, match="fewer than K"):
        make_folds(ds, K=4)
    with pytest.raises(FoldPlanError):
        FoldPlan(assignments=[0, 1, 2], K=2, seed=0, stratified=False)


# ============================================================================
# Confusion matrices and accuracy
# ============================================================================

def test_confusion_rows_must_sum_to_one():
    rows = np.eye(8)
    rows[2] = [0.5, 0.4, 0, 0, 0, 0, 0, 0]
    with pytest.raises(EvaluationError, match="row c"):
        ConfusionMatrix(rows)
    with pytest.raises(EvaluationError, match="8x8"):
        ConfusionMatrix(np.eye(3))
    rows[2] = 0.0
    assert ConfusionMatrix(rows).rows[2].sum() == 0.0


def test_fold_counts_and_normalization():
    y_true = [0, 0, 0, 1, 1, 4]
    y_pred = [0, 0, 1, 1, 1, 0]
    counts = CrossValEvaluator.fold_counts(y_true, y_pred)
    assert counts.shape == (8, 8)
    norm = CrossValEvaluator.row_normalize(counts)
    np.testing.assert_allclose(norm[0, :2], [2 / 3, 1 / 3])
    assert norm[4, 0] == 1.0
    assert not np.any(norm[5])
    assert CrossValEvaluator.fold_accuracy(y_true, y_pred) == pytest.approx(4 / 6)


def test_average_skips_untested_rows():
    first = np.eye(8)
    second = np.eye(8)
    second[0] = [0.5, 0.5, 0, 0, 0, 0, 0, 0]
    second[7] = 0.0
    tested_first = np.ones(8, dtype=bool)
    tested_second = np.ones(8, dtype=bool)
    tested_second[7] = False

    mean = CrossValEvaluator.average_confusions([first, second], [tested_first, tested_second])
    np.testing.assert_allclose(mean.rows[0, :2], [0.75, 0.25])
    assert mean.rows[7, 7] == 1.0
    np.testing.assert_allclose(mean.rows.sum(axis=1), 1.0, atol=1e-6)


def test_accuracy_stats_use_sample_sd():
    mean, sd = CrossValEvaluator.accuracy_stats([0.9, 1.0, 0.95, 0.85])
    assert mean == pytest.approx(0.925, abs=1e-12)
    assert sd == pytest.approx(np.std([0.9, 1.0, 0.95, 0.85], ddof=1))
    assert CrossValEvaluator.accuracy_stats([0.5]) == (0.5, 0.0)


def test_format_accuracy():
    assert format_accuracy(0.9613, 0.0259) == "96.13% (SD = 2.59%)"


# ============================================================================
# Reports
# ============================================================================

def test_text_report():
    text = render_report(_report(), "text").decode()
    assert "Accuracy: 95.00% (SD = 5.00%)" in text
    assert "Excluded traces: 1" in text
    assert "  a    1.00  0.00" in text


def test_csv_report():
    lines = render_report(_report(), "csv").decode().splitlines()
    assert lines[0] == "kind,row,col,value"
    assert "mean_accuracy,,,0.95" in lines
    assert "fold_accuracy,2,,0.95" in lines
    assert "confusion,h,h,1.0" in lines
    assert len([line for line in lines if line.startswith("confusion,")]) == 64


def test_json_report_round_trip(tmp_path):
    report = _report()
    data = json.loads(render_report(report, "json"))
    assert data["per_class_accuracy"]["a"] == 1.0
    assert data["condition"] == {"distance_cm": 20.0, "ambient_on": True}
    assert data["excluded_indices"] == [17]

    path = tmp_path / "r.json"
    save_report(report, path)
    loaded = load_report(path)
    assert report_to_dict(loaded) == report_to_dict(report)


def test_malformed_reports(tmp_path):
    with pytest.raises(EvaluationError, match="malformed report"):
        report_from_dict({"mean_accuracy": 0.5})
    path = tmp_path / "bad.json"
    path.write_text("not json")
    with pytest.raises(EvaluationError, match="not JSON"):
        load_report(path)


def test_unknown_render_format():
    with pytest.raises(ValueError, match="Unknown report format"):
        render_report(_report(), "xml")
