"""Evaluation of trained models and report serialization."""

import csv
import json
from pathlib import Path
from typing import List, Optional, Sequence, Tuple, Union

import numpy as np

from shared.errors import MetricError
from shared.logging import get_logger

from ..baselines import FlatModel, flat_predict
from ..data.models import FeatureBag
from ..hierarchy import Taxonomy, projection_matrix
from ..model.network import HmilModel, predict
from ..tensor.engine import Matrix
from .bootstrap import bootstrap_ci
from .metrics import auc_ovr, confusion_metrics, hierarchy_consistency
from .models import ClassRow, EvaluationReport, MetricsReport


logger = get_logger(__name__)


def metrics_report(
    y_true: Sequence[int],
    scores: Matrix,
    class_names: Sequence[str],
    bootstrap: int = 0,
    seed: int = 0,
) -> MetricsReport:
    """Point metrics of argmax predictions plus optional bootstrap intervals.

    :param y_true: True class indices.
    :param scores: ``n x K`` class probabilities.
    :param class_names: ``K`` names used as report keys.
    :param bootstrap: Number of bootstrap replicates; 0 disables intervals.
    :param seed: Bootstrap seed.
    """
    y = np.asarray(y_true, dtype=int)
    s = np.asarray(scores, dtype=np.float64)
    k = len(class_names)
    y_pred = np.argmax(s, axis=1)
    cm = confusion_metrics(y, y_pred, k)
    try:
        auc = auc_ovr(y, s)
        per_class_auc: List[Optional[float]] = auc.per_class
        macro_auc: Optional[float] = auc.macro
    except MetricError as exc:
        logger.warning(f"AUC undefined: {exc}")
        per_class_auc, macro_auc = [None] * k, None

    rows = [
        ClassRow(
            name=name,
            support=cm.support[c],
            sensitivity=cm.sensitivity[c],
            specificity=cm.specificity[c],
            f1=cm.f1[c],
            auc=per_class_auc[c],
        )
        for c, name in enumerate(class_names)
    ]
    return MetricsReport(
        accuracy=cm.accuracy,
        macro_specificity=cm.macro_specificity,
        macro_sensitivity=cm.macro_sensitivity,
        macro_f1=cm.macro_f1,
        auc_per_class={name: per_class_auc[c] for c, name in enumerate(class_names)},
        macro_auc=macro_auc,
        n=int(y.size),
        per_class=rows,
        bootstrap=bootstrap_ci(y, y_pred, s, bootstrap, seed) if bootstrap > 0 else None,
    )


def evaluate_model(
    model: Union[HmilModel, FlatModel],
    bags: Sequence[FeatureBag],
    taxonomy: Taxonomy,
    *,
    bootstrap: int = 0,
    seed: int = 0,
    split: str = "test",
) -> EvaluationReport:
    """Fine and coarse reports of ``model`` on ``bags``.

    For the dual-branch model the coarse report uses the coarse head and the
    hierarchy-consistency rate is included. A fine-level flat baseline gets a
    coarse report from its projected fine probabilities; a coarse-level one
    gets a coarse report only.

    :raises MetricError: If ``bags`` is empty.
    """
    if not bags:
        raise MetricError(f"no bags in the {split} split")
    features = [b.features for b in bags]
    y_f = [b.y_f for b in bags]
    y_c = [b.y_c for b in bags]
    P = projection_matrix(taxonomy)
    fine_names, coarse_names = taxonomy.fine_names, taxonomy.coarse_names

    if isinstance(model, HmilModel):
        p_c, p_f = predict(model, features)
        report = EvaluationReport(
            model="hmil",
            split=split,
            n=len(bags),
            fine=metrics_report(y_f, p_f, fine_names, bootstrap, seed),
            coarse=metrics_report(y_c, p_c, coarse_names, bootstrap, seed),
            hierarchy_consistency=hierarchy_consistency(p_c, p_f, P),
        )
    elif model.config.label_level == "fine":
        p_f = flat_predict(model, features)
        report = EvaluationReport(
            model=model.config.variant,
            split=split,
            n=len(bags),
            fine=metrics_report(y_f, p_f, fine_names, bootstrap, seed),
            coarse=metrics_report(y_c, p_f @ P.T, coarse_names, bootstrap, seed),
        )
    else:
        p_c = flat_predict(model, features)
        report = EvaluationReport(
            model=model.config.variant,
            split=split,
            n=len(bags),
            coarse=metrics_report(y_c, p_c, coarse_names, bootstrap, seed),
        )
    fine_auc = report.fine.macro_auc if report.fine else None
    coarse_auc = report.coarse.macro_auc if report.coarse else None
    logger.info(
        f"Evaluated {report.model} on {report.n} {split} bags: fine macro-AUC={fine_auc}, "
        f"coarse macro-AUC={coarse_auc}, consistency={report.hierarchy_consistency}"
    )
    return report


def summarize_runs(values: Sequence[Optional[float]]) -> Tuple[Optional[float], Optional[float]]:
    """Mean and (population) standard deviation over runs, skipping ``None``."""
    defined = [v for v in values if v is not None]
    if not defined:
        return None, None
    arr = np.asarray(defined, dtype=np.float64)
    return float(arr.mean()), float(arr.std())


def write_report_json(report: EvaluationReport, path: Union[str, Path]) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    payload = report.model_dump(mode="json")
    path.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    logger.info(f"Wrote report to {path}")
    return path


CSV_COLUMNS = ("level", "name", "support", "sensitivity", "specificity", "f1", "auc")


def write_per_class_csv(report: EvaluationReport, path: Union[str, Path]) -> Path:
    """One row per class and level; undefined values are left empty."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(CSV_COLUMNS)
        for level, metrics in (("fine", report.fine), ("coarse", report.coarse)):
            if metrics is None:
                continue
            for row in metrics.per_class:
                values = row.model_dump()
                writer.writerow(
                    [level] + ["" if values[c] is None else values[c] for c in CSV_COLUMNS[1:]]
                )
    return path
