"""Typed metric reports."""

from typing import Dict, List, Optional

from pydantic import BaseModel, Field


class BootstrapInterval(BaseModel):
    """Spread of one metric across bootstrap replicates.

    ``lo`` and ``hi`` are the 2.5th and 97.5th percentiles; ``replicates``
    counts the replicates on which the metric was defined.
    """

    mean: float
    std: float
    lo: float
    hi: float
    replicates: int


class ClassRow(BaseModel):
    """One-vs-rest metrics of a single class; ``None`` where undefined."""

    name: str
    support: int
    sensitivity: Optional[float] = None
    specificity: Optional[float] = None
    f1: Optional[float] = None
    auc: Optional[float] = None


class MetricsReport(BaseModel):
    """Point metrics of one label level, with optional bootstrap intervals.

    Parameters
    ----------
    accuracy:
        Fraction of correct argmax predictions.
    macro_specificity, macro_sensitivity, macro_f1:
        Means over the classes on which each metric is defined.
    auc_per_class:
        One-vs-rest AUC keyed by class name; ``None`` for classes without
        both positives and negatives.
    macro_auc:
        Mean of the defined per-class AUCs.
    n:
        Number of evaluated bags.
    bootstrap:
        Per-metric intervals, present only when replicates were requested.
    """

    accuracy: float = Field(ge=0.0, le=1.0)
    macro_specificity: Optional[float] = Field(default=None, ge=0.0, le=1.0)
    macro_sensitivity: Optional[float] = Field(default=None, ge=0.0, le=1.0)
    macro_f1: Optional[float] = Field(default=None, ge=0.0, le=1.0)
    auc_per_class: Dict[str, Optional[float]] = Field(default_factory=dict)
    macro_auc: Optional[float] = Field(default=None, ge=0.0, le=1.0)
    n: int = Field(ge=1)
    per_class: List[ClassRow] = Field(default_factory=list)
    bootstrap: Optional[Dict[str, BootstrapInterval]] = None


class EvaluationReport(BaseModel):
    """Fine and coarse reports of one evaluated split.

    ``hierarchy_consistency`` is only reported for the dual-branch model.
    """

    model: str
    split: str
    n: int
    fine: Optional[MetricsReport] = None
    coarse: Optional[MetricsReport] = None
    hierarchy_consistency: Optional[float] = None
