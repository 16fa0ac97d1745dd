"""Loss components and their combination schemes.

Components (all recorded on a tape so they can be differentiated):

- ``ce_c`` / ``ce_f``: cross-entropy of the coarse / fine heads
- ``ia``: instance-level alignment of coarse attention with projected fine attention
- ``ba``: bag-level alignment of projected fine probabilities with the coarse label
- ``reg``: supervised contrastive loss on normalized fine bag representations

Combination schemes, with ``beta = 1 - e/E``:

- ``dynamic``: ``beta*(ce_c + ia + ba) + (1-beta)*reg + ce_f``
- ``static(a, b)``: ``a*(ce_f + ia + ba) + b*reg + ce_c``
- ``coarse_focus``: ``beta*(ce_f + ia + ba) + (1-beta)*reg + ce_c``
"""

from typing import Dict, Literal, Mapping, Optional, Sequence, Tuple

import numpy as np
from pydantic import BaseModel, Field

from shared.errors import ConfigError, LabelError, ScheduleError, ShapeError

from .tensor import ops
from .tensor.engine import Matrix, Node


COMPONENTS: Tuple[str, ...] = ("ce_c", "ce_f", "ia", "ba", "reg")

LOG_FLOOR = 1e-12


class LossMode(BaseModel):
    """How the components are weighted into the total.

    ``a`` and ``b`` are only read by the ``static`` kind.
    """

    kind: Literal["dynamic", "static", "coarse_focus"] = "dynamic"
    a: float = Field(default=1.0, ge=0.0)
    b: float = Field(default=1.0, ge=0.0)

    @classmethod
    def parse(cls, text: str) -> "LossMode":
        """Parse ``dynamic``, ``coarse`` / ``coarse_focus`` or ``static:a,b``."""
        value = text.strip().lower()
        if value == "dynamic":
            return cls(kind="dynamic")
        if value in ("coarse", "coarse_focus", "coarse-focus"):
            return cls(kind="coarse_focus")
        if value.startswith("static"):
            _, _, rest = value.partition(":")
            if not rest:
                return cls(kind="static")
            try:
                a_text, b_text = rest.split(",")
                return cls(kind="static", a=float(a_text), b=float(b_text))
            except ValueError:
                raise ConfigError(f"cannot parse loss mode {text!r}; expected static:a,b") from None
        raise ConfigError(f"unknown loss mode {text!r}")

    def label(self) -> str:
        if self.kind == "static":
            return f"static:{self.a:g},{self.b:g}"
        return self.kind


class LossBreakdown(BaseModel):
    """Values of the five components, the schedule coefficient and the total.

    ``beta`` is ``None`` for the static scheme, which has no schedule.
    """

    ce_c: float
    ce_f: float
    ia: float
    ba: float
    reg: float
    beta: Optional[float] = None
    total: float


def schedule_beta(epoch: int, total_epochs: int) -> float:
    """``beta = 1 - e/E`` for a 0-based epoch index.

    Evaluated as ``(E - e) / E`` so the schedule points ``1``, ``0.5`` and
    ``1/E`` come out exact.

    :raises ScheduleError: If ``E <= 0`` or ``e`` is outside ``[0, E)``.
    """
    if total_epochs <= 0:
        raise ScheduleError(f"total epochs must be positive, got {total_epochs}")
    if not 0 <= epoch < total_epochs:
        raise ScheduleError(f"epoch {epoch} outside [0, {total_epochs})")
    return (total_epochs - epoch) / total_epochs


def loss_weights(
    mode: LossMode, epoch: int, total_epochs: int
) -> Tuple[Dict[str, float], Optional[float]]:
    """Per-component weights for one epoch and the ``beta`` that produced them."""
    beta = schedule_beta(epoch, total_epochs)
    if mode.kind == "dynamic":
        return {"ce_c": beta, "ce_f": 1.0, "ia": beta, "ba": beta, "reg": 1.0 - beta}, beta
    if mode.kind == "coarse_focus":
        return {"ce_c": 1.0, "ce_f": beta, "ia": beta, "ba": beta, "reg": 1.0 - beta}, beta
    return {"ce_c": 1.0, "ce_f": mode.a, "ia": mode.a, "ba": mode.a, "reg": mode.b}, None


def combine(
    components: Mapping[str, float],
    epoch: int,
    total_epochs: int,
    mode: LossMode,
) -> LossBreakdown:
    """Weight float components into a :class:`LossBreakdown`.

    Missing components count as zero. The total is summed in
    :data:`COMPONENTS` order, matching :func:`combine_nodes`.
    """
    weights, beta = loss_weights(mode, epoch, total_epochs)
    values = {name: float(components.get(name, 0.0)) for name in COMPONENTS}
    total = 0.0
    for name in COMPONENTS:
        if name in components:
            total = total + weights[name] * values[name]
    return LossBreakdown(beta=beta, total=total, **values)


def combine_nodes(components: Mapping[str, Node], weights: Mapping[str, float]) -> Node:
    """Weighted sum of component nodes in :data:`COMPONENTS` order."""
    total: Optional[Node] = None
    for name in COMPONENTS:
        node = components.get(name)
        if node is None:
            continue
        term = ops.scale(node, weights[name])
        total = term if total is None else ops.add(total, term)
    if total is None:
        raise ValueError("no loss components to combine")
    return total


def cross_entropy(logits: Node, y: int) -> Node:
    """``-log softmax(logits)[y]`` for a ``1 x K`` logit row.

    :raises LabelError: If ``y`` is outside ``[0, K)``.
    """
    k = logits.shape[1]
    if not 0 <= y < k:
        raise LabelError(f"label {y} outside [0, {k})")
    return ops.scale(ops.pick(ops.log_softmax_rows(logits), 0, y), -1.0)


def instance_alignment(A_c: Node, A_f: Node, P: Matrix) -> Node:
    """Mean over instances of ``1 - cos(a_c(i), P a_f(i))``.

    ``a_c(i)`` and ``a_f(i)`` are instance ``i``'s attention columns. The value
    lies in ``[0, 2]``.

    :raises DegenerateInputError: If an instance has an all-zero column.
    """
    if A_c.shape[1] != A_f.shape[1]:
        raise ShapeError(f"instance_alignment: {A_c.shape} and {A_f.shape} differ in N")
    if P.shape != (A_c.shape[0], A_f.shape[0]):
        raise ShapeError(f"instance_alignment: projection {P.shape} vs {A_c.shape}/{A_f.shape}")
    projected = ops.matmul(A_f.tape.constant(P), A_f)
    coarse_cols = ops.l2_normalize_rows(ops.transpose(A_c))
    fine_cols = ops.l2_normalize_rows(ops.transpose(projected))
    cosines = ops.sum_rows(ops.hadamard(coarse_cols, fine_cols))
    return ops.shift(ops.scale(ops.mean_all(cosines), -1.0), 1.0)


def bag_alignment(p_f: Node, y_c: int, P: Matrix) -> Node:
    """``-log((P p_f)[y_c])`` with the argument floored at ``1e-12``.

    :raises LabelError: If ``y_c`` is not a coarse class.
    """
    if P.shape[1] != p_f.shape[1]:
        raise ShapeError(f"bag_alignment: projection {P.shape} vs probabilities {p_f.shape}")
    if not 0 <= y_c < P.shape[0]:
        raise LabelError(f"coarse label {y_c} outside [0, {P.shape[0]})")
    coarse = ops.matmul(p_f, p_f.tape.constant(P.T))
    picked = ops.clamp_min(ops.pick(coarse, 0, y_c), LOG_FLOOR)
    return ops.scale(ops.log(picked), -1.0)


def supcon(features: Sequence[Node], labels: Sequence[int], tau: float) -> Node:
    """Supervised contrastive loss over a batch of bag representations.

    Each representation is flattened and l2-normalized. For anchor ``i`` the
    positives are the other bags with the same label and the denominator runs
    over every other bag. Per-anchor losses are summed over the batch; anchors
    without positives contribute nothing (zero when none remain).

    :raises DegenerateInputError: If a flattened representation has zero norm.
    """
    if not features:
        raise ShapeError("supcon needs at least one bag")
    if len(features) != len(labels):
        raise ShapeError(f"supcon: {len(features)} features vs {len(labels)} labels")
    if tau <= 0:
        raise ConfigError(f"tau must be positive, got {tau}")
    tape = features[0].tape
    z = ops.l2_normalize_rows(ops.stack_rows([ops.flatten(f) for f in features]))

    y = np.asarray(labels)
    b = len(y)
    others = ~np.eye(b, dtype=bool)
    positives = (y[:, None] == y[None, :]) & others
    counts = positives.sum(axis=1)
    anchors = counts > 0
    if not anchors.any():
        return tape.constant(0.0)

    weights = np.where(positives, 1.0, 0.0)
    weights[anchors] /= counts[anchors, None]

    sims = ops.scale(ops.matmul(z, ops.transpose(z)), 1.0 / tau)
    log_prob = ops.masked_log_softmax_rows(sims, others)
    return ops.scale(ops.sum_all(ops.hadamard(tape.constant(weights), log_prob)), -1.0)
