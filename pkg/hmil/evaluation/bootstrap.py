"""Non-parametric bootstrap intervals for the metric suite."""

from typing import Dict, List, Optional, Sequence

import numpy as np

from shared.errors import ConfigError, MetricError
from shared.logging import get_logger

from ..tensor.engine import Matrix
from .metrics import auc_ovr, confusion_metrics
from .models import BootstrapInterval


logger = get_logger(__name__)

BOOTSTRAP_METRICS = ("accuracy", "macro_specificity", "macro_sensitivity", "macro_f1", "macro_auc")


def point_metrics(
    y_true: np.ndarray, y_pred: np.ndarray, scores: Matrix, k: int
) -> Dict[str, Optional[float]]:
    """The bootstrapped metrics on one sample; ``None`` where undefined."""
    cm = confusion_metrics(y_true, y_pred, k)
    try:
        auc: Optional[float] = auc_ovr(y_true, scores).macro
    except MetricError:
        auc = None
    return {
        "accuracy": cm.accuracy,
        "macro_specificity": cm.macro_specificity,
        "macro_sensitivity": cm.macro_sensitivity,
        "macro_f1": cm.macro_f1,
        "macro_auc": auc,
    }


def bootstrap_ci(
    y_true: Sequence[int],
    y_pred: Sequence[int],
    scores: Matrix,
    replicates: int,
    seed: int,
    *,
    identity: bool = False,
) -> Dict[str, BootstrapInterval]:
    """Resample ``n`` indices with replacement per replicate and recompute
    every metric.

    Replicate ``r`` draws from ``default_rng([seed, r])``, so any replicate
    can be recomputed on its own. Replicates on which a metric is undefined
    are skipped for that metric; a metric undefined everywhere is omitted.

    :param identity: Use the identity resample in every replicate (the
                     intervals then collapse onto the point estimates).
    :raises ConfigError: If ``replicates < 1``.
    """
    if replicates < 1:
        raise ConfigError(f"replicates must be >= 1, got {replicates}")
    yt = np.asarray(y_true, dtype=int)
    yp = np.asarray(y_pred, dtype=int)
    s = np.asarray(scores, dtype=np.float64)
    n, k = s.shape

    samples: Dict[str, List[float]] = {name: [] for name in BOOTSTRAP_METRICS}
    for r in range(replicates):
        if identity:
            idx = np.arange(n)
        else:
            idx = np.random.default_rng([seed, r]).integers(0, n, size=n)
        for name, value in point_metrics(yt[idx], yp[idx], s[idx], k).items():
            if value is not None:
                samples[name].append(value)

    out: Dict[str, BootstrapInterval] = {}
    for name, values in samples.items():
        if not values:
            logger.warning(f"bootstrap: {name} undefined on every replicate")
            continue
        arr = np.asarray(values)
        out[name] = BootstrapInterval(
            mean=float(arr.mean()),
            std=float(arr.std()),
            lo=float(np.percentile(arr, 2.5)),
            hi=float(np.percentile(arr, 97.5)),
            replicates=len(values),
        )
    logger.debug(f"bootstrap: {replicates} replicates on {n} samples (seed={seed})")
    return out
