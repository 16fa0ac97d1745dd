"""Metric suite.

Model evaluation and report writers live in :mod:`hmil.evaluation.report`,
which is imported explicitly.
"""

from .bootstrap import bootstrap_ci
from .metrics import (
    AucResult,
    ConfusionMetrics,
    auc_ovr,
    confusion_metrics,
    hierarchy_consistency,
    macro_auc_or_none,
)
from .models import BootstrapInterval, ClassRow, EvaluationReport, MetricsReport

__all__ = [
    "AucResult",
    "BootstrapInterval",
    "ClassRow",
    "ConfusionMetrics",
    "EvaluationReport",
    "MetricsReport",
    "auc_ovr",
    "bootstrap_ci",
    "confusion_metrics",
    "hierarchy_consistency",
    "macro_auc_or_none",
]
