"""Classification metrics computed one-vs-rest.

Undefined per-class values (no true members for sensitivity and F1, no
negatives for specificity, a single class present for AUC) are ``None`` and
left out of the macro averages.
"""

from dataclasses import dataclass
from typing import List, Optional, Sequence

import numpy as np
from scipy.stats import rankdata
from sklearn.metrics import confusion_matrix

from shared.errors import LabelError, MetricError, ShapeError

from ..tensor.engine import Matrix


@dataclass(frozen=True)
class ConfusionMetrics:
    accuracy: float
    sensitivity: List[Optional[float]]
    specificity: List[Optional[float]]
    f1: List[Optional[float]]
    support: List[int]

    @property
    def macro_sensitivity(self) -> Optional[float]:
        return macro_mean(self.sensitivity)

    @property
    def macro_specificity(self) -> Optional[float]:
        return macro_mean(self.specificity)

    @property
    def macro_f1(self) -> Optional[float]:
        return macro_mean(self.f1)


@dataclass(frozen=True)
class AucResult:
    per_class: List[Optional[float]]
    macro: float


def macro_mean(values: Sequence[Optional[float]]) -> Optional[float]:
    defined = [v for v in values if v is not None]
    if not defined:
        return None
    return float(np.mean(defined))


def _check_labels(y: np.ndarray, k: int, what: str) -> None:
    if y.size and (y.min() < 0 or y.max() >= k):
        raise LabelError(f"{what} labels must lie in [0, {k})")


def confusion_metrics(y_true: Sequence[int], y_pred: Sequence[int], k: int) -> ConfusionMetrics:
    """Accuracy and per-class sensitivity, specificity and F1.

    For class ``c``: sensitivity ``TP/(TP+FN)``, specificity ``TN/(TN+FP)``,
    F1 ``2TP/(2TP+FP+FN)``.

    :raises MetricError: On empty input or a length mismatch.
    :raises LabelError: If a label is outside ``[0, k)``.
    """
    yt = np.asarray(y_true, dtype=int)
    yp = np.asarray(y_pred, dtype=int)
    if yt.shape != yp.shape:
        raise MetricError(f"length mismatch: {yt.shape[0]} true vs {yp.shape[0]} predicted")
    if yt.size == 0:
        raise MetricError("no samples to evaluate")
    _check_labels(yt, k, "true")
    _check_labels(yp, k, "predicted")

    cm = confusion_matrix(yt, yp, labels=list(range(k)))
    n = int(yt.size)
    tp = np.diag(cm)
    fn = cm.sum(axis=1) - tp
    fp = cm.sum(axis=0) - tp
    tn = n - tp - fn - fp

    sens: List[Optional[float]] = []
    spec: List[Optional[float]] = []
    f1: List[Optional[float]] = []
    for c in range(k):
        positives = int(tp[c] + fn[c])
        negatives = int(tn[c] + fp[c])
        sens.append(float(tp[c] / positives) if positives else None)
        f1.append(float(2 * tp[c] / (2 * tp[c] + fp[c] + fn[c])) if positives else None)
        spec.append(float(tn[c] / negatives) if negatives else None)
    return ConfusionMetrics(
        accuracy=float(tp.sum() / n),
        sensitivity=sens,
        specificity=spec,
        f1=f1,
        support=[int(s) for s in cm.sum(axis=1)],
    )


def binary_auc(relevant: np.ndarray, scores: np.ndarray) -> Optional[float]:
    """Mann-Whitney AUC from midranks; tied pairs count one half."""
    n_pos = int(relevant.sum())
    n_neg = int(relevant.size - n_pos)
    if n_pos == 0 or n_neg == 0:
        return None
    ranks = rankdata(scores, method="average")
    u = float(ranks[relevant].sum()) - n_pos * (n_pos + 1) / 2.0
    return u / (n_pos * n_neg)


def auc_ovr(y_true: Sequence[int], scores: Matrix) -> AucResult:
    """One-vs-rest AUC of each score column against ``y_true == k``.

    :raises MetricError: With fewer than two samples or when every class is
                         undefined.
    :raises ShapeError: If ``scores`` is not ``n x K``.
    """
    y = np.asarray(y_true, dtype=int)
    s = np.asarray(scores, dtype=np.float64)
    if s.ndim != 2 or s.shape[0] != y.size:
        raise ShapeError(f"scores {s.shape} do not match {y.size} labels")
    if y.size < 2:
        raise MetricError("AUC needs at least two samples")
    _check_labels(y, s.shape[1], "true")
    per_class = [binary_auc(y == k, s[:, k]) for k in range(s.shape[1])]
    macro = macro_mean(per_class)
    if macro is None:
        raise MetricError("AUC undefined for every class: labels contain a single class")
    return AucResult(per_class=per_class, macro=macro)


def hierarchy_consistency(p_c: Matrix, p_f: Matrix, P: Matrix) -> float:
    """Fraction of samples where ``argmax(P p_f) == argmax(p_c)``.

    ``np.argmax`` breaks ties toward the lowest class index.

    :raises MetricError: On a length mismatch or empty input.
    """
    p_c = np.asarray(p_c, dtype=np.float64)
    p_f = np.asarray(p_f, dtype=np.float64)
    if p_c.ndim != 2 or p_f.ndim != 2 or p_c.shape[0] != p_f.shape[0]:
        raise MetricError(f"batch mismatch: coarse {p_c.shape} vs fine {p_f.shape}")
    if p_c.shape[0] == 0:
        raise MetricError("no samples to compare")
    if P.shape != (p_c.shape[1], p_f.shape[1]):
        raise ShapeError(f"projection {P.shape} vs coarse {p_c.shape} / fine {p_f.shape}")
    projected = p_f @ P.T
    agree = np.argmax(projected, axis=1) == np.argmax(p_c, axis=1)
    return float(agree.mean())


def macro_auc_or_none(y_true: Sequence[int], scores: Matrix) -> Optional[float]:
    """Macro AUC, or ``None`` when it is undefined."""
    try:
        return auc_ovr(y_true, scores).macro
    except MetricError:
        return None
