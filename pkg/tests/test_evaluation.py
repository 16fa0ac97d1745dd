import csv
import json
from pathlib import Path

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from hmil.data import Dataset
from hmil.evaluation import auc_ovr, bootstrap_ci, confusion_metrics, hierarchy_consistency
from hmil.evaluation.metrics import binary_auc
from hmil.evaluation.report import (
    evaluate_model,
    metrics_report,
    summarize_runs,
    write_per_class_csv,
    write_report_json,
)
from hmil.hierarchy import Taxonomy, projection_matrix
from hmil.model import HmilConfig, init_model
from shared.errors import ConfigError, LabelError, MetricError


def _pairwise_auc(relevant: np.ndarray, scores: np.ndarray) -> float:
    pos = scores[relevant]
    neg = scores[~relevant]
    wins = sum(1.0 if p > n else 0.5 if p == n else 0.0 for p in pos for n in neg)
    return wins / (len(pos) * len(neg))


def test_confusion_metrics_against_counts() -> None:
    rng = np.random.default_rng(0)
    y_true = rng.integers(0, 3, size=60)
    y_pred = rng.integers(0, 3, size=60)
    cm = confusion_metrics(y_true, y_pred, 3)
    assert cm.accuracy == pytest.approx(np.mean(y_true == y_pred))
    for c in range(3):
        tp = np.sum((y_true == c) & (y_pred == c))
        fn = np.sum((y_true == c) & (y_pred != c))
        fp = np.sum((y_true != c) & (y_pred == c))
        tn = np.sum((y_true != c) & (y_pred != c))
        assert cm.sensitivity[c] == pytest.approx(tp / (tp + fn))
        assert cm.specificity[c] == pytest.approx(tn / (tn + fp))
        assert cm.f1[c] == pytest.approx(2 * tp / (2 * tp + fp + fn))
        assert cm.support[c] == tp + fn


def test_confusion_metrics_absent_class_is_undefined() -> None:
    cm = confusion_metrics([0, 0, 1], [0, 1, 1], 3)
    assert cm.sensitivity[2] is None and cm.f1[2] is None
    assert cm.specificity[2] == 1.0
    assert cm.macro_sensitivity == pytest.approx((0.5 + 1.0) / 2)


def test_confusion_metrics_errors() -> None:
    with pytest.raises(MetricError):
        confusion_metrics([], [], 2)
    with pytest.raises(MetricError):
        confusion_metrics([0, 1], [0], 2)
    with pytest.raises(LabelError):
        confusion_metrics([0, 2], [0, 1], 2)


@settings(max_examples=200, deadline=None)
@given(seed=st.integers(min_value=0, max_value=2**32 - 1), n=st.integers(min_value=2, max_value=100))
def test_binary_auc_matches_pairwise_count(seed: int, n: int) -> None:
    rng = np.random.default_rng(seed)
    relevant = rng.random(n) < 0.4
    # Coarse scores so ties are common.
    scores = rng.integers(0, 5, size=n).astype(float)
    value = binary_auc(relevant, scores)
    if relevant.all() or not relevant.any():
        assert value is None
    else:
        assert value == pytest.approx(_pairwise_auc(relevant, scores), abs=1e-12)


def test_auc_invariant_to_monotone_transform() -> None:
    rng = np.random.default_rng(3)
    y = rng.integers(0, 3, size=50)
    scores = rng.random((50, 3))
    a = auc_ovr(y, scores)
    b = auc_ovr(y, np.exp(5.0 * scores) + 2.0)
    assert a.per_class == pytest.approx(b.per_class)


def test_auc_undefined_cases() -> None:
    result = auc_ovr([0, 0, 1, 1], np.array([[0.9, 0.1, 0.0]] * 2 + [[0.2, 0.8, 0.0]] * 2))
    assert result.per_class[2] is None
    assert result.macro == 1.0
    with pytest.raises(MetricError):
        auc_ovr([1, 1, 1], np.full((3, 2), 0.5))
    with pytest.raises(MetricError):
        auc_ovr([0], np.ones((1, 2)))


def test_hierarchy_consistency(taxonomy: Taxonomy) -> None:
    P = projection_matrix(taxonomy)
    p_f = np.array([[0.7, 0.1, 0.1, 0.1], [0.1, 0.1, 0.1, 0.7]])
    assert hierarchy_consistency(np.array([[0.9, 0.1], [0.2, 0.8]]), p_f, P) == 1.0
    assert hierarchy_consistency(np.array([[0.9, 0.1], [0.9, 0.1]]), p_f, P) == 0.5
    with pytest.raises(MetricError):
        hierarchy_consistency(np.ones((1, 2)), p_f, P)


def _bootstrap_inputs():
    rng = np.random.default_rng(1)
    y = rng.integers(0, 3, size=40)
    scores = rng.dirichlet(np.ones(3), size=40)
    return y, np.argmax(scores, axis=1), scores


def test_bootstrap_is_deterministic_per_seed() -> None:
    y, pred, scores = _bootstrap_inputs()
    a = bootstrap_ci(y, pred, scores, 50, seed=7)
    b = bootstrap_ci(y, pred, scores, 50, seed=7)
    c = bootstrap_ci(y, pred, scores, 50, seed=8)
    assert a == b
    assert a["macro_auc"].mean != c["macro_auc"].mean
    for interval in a.values():
        assert interval.lo <= interval.mean <= interval.hi


def test_identity_bootstrap_collapses_to_point_estimate() -> None:
    y, pred, scores = _bootstrap_inputs()
    out = bootstrap_ci(y, pred, scores, 5, seed=0, identity=True)
    acc = float(np.mean(y == pred))
    assert out["accuracy"].mean == pytest.approx(acc)
    assert out["accuracy"].std == pytest.approx(0.0, abs=1e-15)
    assert out["macro_auc"].mean == pytest.approx(auc_ovr(y, scores).macro)


def test_bootstrap_requires_replicates() -> None:
    y, pred, scores = _bootstrap_inputs()
    with pytest.raises(ConfigError):
        bootstrap_ci(y, pred, scores, 0, seed=0)


def test_metrics_report_rows() -> None:
    y, _, scores = _bootstrap_inputs()
    report = metrics_report(y, scores, ["a", "b", "c"], bootstrap=10, seed=2)
    assert report.n == 40
    assert [row.name for row in report.per_class] == ["a", "b", "c"]
    assert sum(row.support for row in report.per_class) == 40
    assert set(report.auc_per_class) == {"a", "b", "c"}
    assert report.bootstrap is not None and "macro_f1" in report.bootstrap


def test_evaluate_model_and_writers(tmp_path: Path, tiny_dataset: Dataset) -> None:
    t = tiny_dataset.taxonomy
    model = init_model(HmilConfig(d_c=8, n_coarse=t.n_coarse, n_fine=t.n_fine, seed=1))
    report = evaluate_model(model, tiny_dataset.bags, t)
    assert report.model == "hmil" and report.n == 40
    assert report.fine is not None and report.coarse is not None
    assert 0.0 <= report.hierarchy_consistency <= 1.0

    json_path = write_report_json(report, tmp_path / "report.json")
    assert json.loads(json_path.read_text(encoding="utf-8"))["n"] == 40
    csv_path = write_per_class_csv(report, tmp_path / "per_class.csv")
    with csv_path.open(encoding="utf-8") as fh:
        rows = list(csv.DictReader(fh))
    assert len(rows) == t.n_fine + t.n_coarse
    assert [r["level"] for r in rows].count("coarse") == t.n_coarse

    with pytest.raises(MetricError):
        evaluate_model(model, [], t)


def test_summarize_runs() -> None:
    assert summarize_runs([0.5, 0.7, None]) == pytest.approx((0.6, 0.1))
    assert summarize_runs([None]) == (None, None)
