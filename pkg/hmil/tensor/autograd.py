"""Reverse-mode differentiation over a :class:`~hmil.tensor.engine.Tape`.

``BACKWARD_RULES`` maps an op tag to its vector-Jacobian product: given the
node, the upstream gradient and the parents' values, it returns one gradient
per parent. The registry is a plain dict so a rule can be swapped out, e.g. to
check that the gradient checker catches a broken rule.
"""

from typing import Callable, Dict, List, Sequence, Tuple

import numpy as np

from shared.errors import GraphError, ShapeError

from .engine import Matrix, Node


BackwardRule = Callable[[Node, Matrix, List[Matrix]], Tuple[Matrix, ...]]

Gradients = Dict[int, Matrix]


def _matmul(node: Node, g: Matrix, p: List[Matrix]) -> Tuple[Matrix, ...]:
    a, b = p
    return g @ b.T, a.T @ g


def _add(node: Node, g: Matrix, p: List[Matrix]) -> Tuple[Matrix, ...]:
    return g, g


def _add_row(node: Node, g: Matrix, p: List[Matrix]) -> Tuple[Matrix, ...]:
    return g, g.sum(axis=0, keepdims=True)


def _hadamard(node: Node, g: Matrix, p: List[Matrix]) -> Tuple[Matrix, ...]:
    a, b = p
    return g * b, g * a


def _scale(node: Node, g: Matrix, p: List[Matrix]) -> Tuple[Matrix, ...]:
    return (g * node.attrs["factor"],)


def _shift(node: Node, g: Matrix, p: List[Matrix]) -> Tuple[Matrix, ...]:
    return (g,)


def _tanh(node: Node, g: Matrix, p: List[Matrix]) -> Tuple[Matrix, ...]:
    y = node.value
    return (g * (1.0 - y * y),)


def _sigmoid(node: Node, g: Matrix, p: List[Matrix]) -> Tuple[Matrix, ...]:
    y = node.value
    return (g * y * (1.0 - y),)


def _exp(node: Node, g: Matrix, p: List[Matrix]) -> Tuple[Matrix, ...]:
    return (g * node.value,)


def _log(node: Node, g: Matrix, p: List[Matrix]) -> Tuple[Matrix, ...]:
    return (g / p[0],)


def _clamp_min(node: Node, g: Matrix, p: List[Matrix]) -> Tuple[Matrix, ...]:
    return (np.where(p[0] > node.attrs["floor"], g, 0.0),)


def _transpose(node: Node, g: Matrix, p: List[Matrix]) -> Tuple[Matrix, ...]:
    return (g.T,)


def _reshape(node: Node, g: Matrix, p: List[Matrix]) -> Tuple[Matrix, ...]:
    return (g.reshape(p[0].shape),)


def _sum_all(node: Node, g: Matrix, p: List[Matrix]) -> Tuple[Matrix, ...]:
    return (np.full(p[0].shape, g[0, 0]),)


def _sum_rows(node: Node, g: Matrix, p: List[Matrix]) -> Tuple[Matrix, ...]:
    return (np.broadcast_to(g, p[0].shape).copy(),)


def _mean_rows(node: Node, g: Matrix, p: List[Matrix]) -> Tuple[Matrix, ...]:
    m = p[0].shape[0]
    return (np.broadcast_to(g / m, p[0].shape).copy(),)


def _max_rows(node: Node, g: Matrix, p: List[Matrix]) -> Tuple[Matrix, ...]:
    out = np.zeros_like(p[0])
    idx = node.attrs["index"]
    out[idx, np.arange(p[0].shape[1])] = g[0]
    return (out,)


def _pick(node: Node, g: Matrix, p: List[Matrix]) -> Tuple[Matrix, ...]:
    out = np.zeros_like(p[0])
    out[node.attrs["row"], node.attrs["col"]] = g[0, 0]
    return (out,)


def _stack_rows(node: Node, g: Matrix, p: List[Matrix]) -> Tuple[Matrix, ...]:
    return tuple(g[i : i + 1, :] for i in range(g.shape[0]))


def _rowwise_softmax(node: Node, g: Matrix, p: List[Matrix]) -> Tuple[Matrix, ...]:
    y = node.value
    return (y * (g - (g * y).sum(axis=1, keepdims=True)),)


def _log_softmax_rows(node: Node, g: Matrix, p: List[Matrix]) -> Tuple[Matrix, ...]:
    soft = np.exp(node.value)
    return (g - soft * g.sum(axis=1, keepdims=True),)


def _masked_log_softmax_rows(node: Node, g: Matrix, p: List[Matrix]) -> Tuple[Matrix, ...]:
    mask = node.attrs["mask"]
    x = p[0]
    masked = np.where(mask, x, -np.inf)
    e = np.where(mask, np.exp(masked - masked.max(axis=1, keepdims=True)), 0.0)
    soft = e / e.sum(axis=1, keepdims=True)
    return (g - soft * g.sum(axis=1, keepdims=True),)


def _l2_normalize_rows(node: Node, g: Matrix, p: List[Matrix]) -> Tuple[Matrix, ...]:
    y = node.value
    norms = node.attrs["norms"]
    return ((g - y * (g * y).sum(axis=1, keepdims=True)) / norms,)


BACKWARD_RULES: Dict[str, BackwardRule] = {
    "matmul": _matmul,
    "add": _add,
    "add_row": _add_row,
    "hadamard": _hadamard,
    "scale": _scale,
    "shift": _shift,
    "tanh": _tanh,
    "sigmoid": _sigmoid,
    "exp": _exp,
    "log": _log,
    "clamp_min": _clamp_min,
    "transpose": _transpose,
    "reshape": _reshape,
    "sum_all": _sum_all,
    "sum_rows": _sum_rows,
    "mean_rows": _mean_rows,
    "max_rows": _max_rows,
    "pick": _pick,
    "stack_rows": _stack_rows,
    "rowwise_softmax": _rowwise_softmax,
    "log_softmax_rows": _log_softmax_rows,
    "masked_log_softmax_rows": _masked_log_softmax_rows,
    "l2_normalize_rows": _l2_normalize_rows,
}


def backward(loss: Node, params: Sequence[Node]) -> Gradients:
    """Gradients of a scalar ``loss`` with respect to ``params``.

    Walks the tape once in reverse creation order, accumulating
    vector-Jacobian products in a fixed order, so repeated calls on the same
    graph return identical arrays.

    :param loss: A ``1x1`` node.
    :param params: Leaf nodes to differentiate with respect to.
    :returns: Mapping from parameter node id to a gradient of the same shape.
    :raises ShapeError: If ``loss`` is not ``1x1``.
    :raises GraphError: If a parameter does not influence ``loss``.
    """
    if loss.shape != (1, 1):
        raise ShapeError(f"backward needs a 1x1 loss, got {loss.shape}")
    tape = loss.tape
    deps = tape.ancestors(loss)
    for param in params:
        if param.tape is not tape:
            raise GraphError(f"parameter {param.name or param.id} belongs to another tape")
        if param.id not in deps:
            raise GraphError(
                f"parameter {param.name or param.id} is not reachable from the loss"
            )

    grads: Dict[int, Matrix] = {loss.id: np.ones((1, 1))}
    for node_id in range(loss.id, -1, -1):
        g = grads.get(node_id)
        if g is None or node_id not in deps:
            continue
        node = tape.nodes[node_id]
        if not node.parents:
            continue
        rule = BACKWARD_RULES.get(node.op)
        if rule is None:
            raise GraphError(f"no backward rule for op {node.op!r}")
        parent_values = [tape.nodes[i].value for i in node.parents]
        parent_grads = rule(node, g, parent_values)
        for parent_id, pg in zip(node.parents, parent_grads):
            if parent_id in grads:
                grads[parent_id] = grads[parent_id] + pg
            else:
                grads[parent_id] = np.array(pg, dtype=np.float64, copy=True)

    return {p.id: grads[p.id] for p in params}
