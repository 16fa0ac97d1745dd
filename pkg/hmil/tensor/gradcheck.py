"""Central finite-difference checks for analytic gradients."""

from typing import Callable, Dict, Mapping, Optional, Sequence

import numpy as np

from shared.errors import ConfigError, NumericError
from shared.logging import get_logger

from .autograd import backward
from .engine import Matrix, Node


logger = get_logger(__name__)

LossBuilder = Callable[[Mapping[str, Matrix]], Node]


def _loss_value(build_loss: LossBuilder, params: Mapping[str, Matrix]) -> float:
    value = build_loss(params).item()
    if not np.isfinite(value):
        raise NumericError("loss became non-finite at a perturbed point")
    return value


def grad_check(
    build_loss: LossBuilder,
    params: Mapping[str, Matrix],
    epsilon: float = 1e-5,
    names: Optional[Sequence[str]] = None,
) -> float:
    """Compare analytic gradients with central differences.

    ``build_loss`` receives a mapping of parameter arrays, records a fresh
    graph registering each array with :meth:`Tape.parameter` under its name,
    and returns the scalar loss node. Only parameters the loss depends on are
    perturbed.

    :param build_loss: Loss constructor, called once per perturbation.
    :param params: Parameter arrays keyed by name.
    :param epsilon: Finite-difference step (> 0).
    :param names: Optional subset of parameter names to check.
    :returns: ``max |analytic - numeric| / max(1e-8, |numeric|)`` over every
              perturbed entry.
    :raises NumericError: If the loss turns non-finite at a perturbed point.
    """
    if epsilon <= 0:
        raise ConfigError("epsilon must be positive")

    base: Dict[str, Matrix] = {k: np.array(v, dtype=np.float64) for k, v in params.items()}
    loss = build_loss(base)
    if not np.isfinite(loss.item()):
        raise NumericError("loss is non-finite at the base point")
    reachable = loss.tape.reachable_parameters(loss)
    if names is not None:
        reachable = {k: v for k, v in reachable.items() if k in set(names)}
    analytic = backward(loss, list(reachable.values()))

    worst = 0.0
    for name, node in reachable.items():
        grad = analytic[node.id]
        shifted = {k: v.copy() for k, v in base.items()}
        target = shifted[name]
        for idx in np.ndindex(*target.shape):
            original = target[idx]
            target[idx] = original + epsilon
            plus = _loss_value(build_loss, shifted)
            target[idx] = original - epsilon
            minus = _loss_value(build_loss, shifted)
            target[idx] = original
            numeric = (plus - minus) / (2.0 * epsilon)
            err = abs(grad[idx] - numeric) / max(1e-8, abs(numeric))
            worst = max(worst, err)
        logger.debug(f"grad_check {name}: running max rel error {worst:.3e}")
    return float(worst)
