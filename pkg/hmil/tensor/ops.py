"""Forward operations of the tensor core.

Every function takes :class:`~hmil.tensor.engine.Node` operands living on the
same tape and records its result there. Backward rules for each ``op`` tag live
in :mod:`hmil.tensor.autograd`.
"""

from typing import Any, Literal, Sequence

import numpy as np

from shared.errors import DegenerateInputError, DomainError, GraphError, NumericError, ShapeError

from .engine import Matrix, Node


ElementwiseKind = Literal[
    "tanh", "sigmoid", "log", "exp", "l2_normalize_rows", "hadamard", "add", "scale"
]


def _same_shape(op: str, a: Node, b: Node) -> None:
    if a.shape != b.shape:
        raise ShapeError(f"{op}: shapes {a.shape} and {b.shape} do not agree")


def _finite(op: str, value: Matrix) -> Matrix:
    if not np.all(np.isfinite(value)):
        raise NumericError(f"{op} produced non-finite values")
    return value


def matmul(a: Node, b: Node) -> Node:
    """Matrix product ``a @ b``.

    :raises ShapeError: If the inner dimensions differ; the message names both
                        shapes.
    """
    if a.shape[1] != b.shape[0]:
        raise ShapeError(f"matmul: cannot multiply {a.shape} by {b.shape}")
    return a.tape.record("matmul", a.value @ b.value, (a, b))


def add(a: Node, b: Node) -> Node:
    _same_shape("add", a, b)
    return a.tape.record("add", a.value + b.value, (a, b))


def add_row(x: Node, row: Node) -> Node:
    """Add a ``1 x n`` row to every row of an ``m x n`` matrix (bias term)."""
    if row.shape[0] != 1 or row.shape[1] != x.shape[1]:
        raise ShapeError(f"add_row: row {row.shape} does not fit matrix {x.shape}")
    return x.tape.record("add_row", x.value + row.value, (x, row))


def hadamard(a: Node, b: Node) -> Node:
    _same_shape("hadamard", a, b)
    return a.tape.record("hadamard", a.value * b.value, (a, b))


def scale(x: Node, factor: float) -> Node:
    return x.tape.record("scale", x.value * float(factor), (x,), factor=float(factor))


def shift(x: Node, offset: float) -> Node:
    """Add the constant ``offset`` to every entry."""
    return x.tape.record("shift", x.value + float(offset), (x,))


def tanh(x: Node) -> Node:
    return x.tape.record("tanh", np.tanh(x.value), (x,))


def sigmoid(x: Node) -> Node:
    v = x.value
    # Split by sign so exp never overflows.
    out = np.empty_like(v)
    pos = v >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-v[pos]))
    ez = np.exp(v[~pos])
    out[~pos] = ez / (1.0 + ez)
    return x.tape.record("sigmoid", out, (x,))


def exp(x: Node) -> Node:
    return x.tape.record("exp", _finite("exp", np.exp(x.value)), (x,))


def log(x: Node) -> Node:
    """Natural logarithm.

    :raises DomainError: If any entry is not strictly positive.
    """
    if np.any(x.value <= 0.0):
        raise DomainError("log: input has nonpositive entries")
    return x.tape.record("log", np.log(x.value), (x,))


def clamp_min(x: Node, floor: float) -> Node:
    """Entrywise ``max(x, floor)``; entries below the floor get zero gradient."""
    return x.tape.record("clamp_min", np.maximum(x.value, floor), (x,), floor=float(floor))


def transpose(x: Node) -> Node:
    return x.tape.record("transpose", np.ascontiguousarray(x.value.T), (x,))


def reshape(x: Node, rows: int, cols: int) -> Node:
    if rows * cols != x.value.size:
        raise ShapeError(f"reshape: cannot view {x.shape} as ({rows}, {cols})")
    return x.tape.record("reshape", x.value.reshape(rows, cols), (x,))


def flatten(x: Node) -> Node:
    """Row-major flatten into a single ``1 x (m*n)`` row."""
    return reshape(x, 1, x.value.size)


def sum_all(x: Node) -> Node:
    return x.tape.record("sum_all", np.array([[x.value.sum()]]), (x,))


def mean_all(x: Node) -> Node:
    return scale(sum_all(x), 1.0 / x.value.size)


def sum_rows(x: Node) -> Node:
    """Sum along each row: ``m x n -> m x 1``."""
    return x.tape.record("sum_rows", x.value.sum(axis=1, keepdims=True), (x,))


def mean_rows(x: Node) -> Node:
    """Column means over the rows: ``m x n -> 1 x n``."""
    return x.tape.record("mean_rows", x.value.mean(axis=0, keepdims=True), (x,))


def max_rows(x: Node) -> Node:
    """Column maxima over the rows: ``m x n -> 1 x n``.

    The gradient flows to the first row attaining each maximum.
    """
    idx = np.argmax(x.value, axis=0)
    out = x.value[idx, np.arange(x.shape[1])].reshape(1, -1)
    return x.tape.record("max_rows", out, (x,), index=idx)


def pick(x: Node, row: int, col: int) -> Node:
    """Select entry ``(row, col)`` as a ``1x1`` node."""
    m, n = x.shape
    if not (0 <= row < m and 0 <= col < n):
        raise ShapeError(f"pick: index ({row}, {col}) outside {x.shape}")
    return x.tape.record("pick", np.array([[x.value[row, col]]]), (x,), row=row, col=col)


def stack_rows(rows: Sequence[Node]) -> Node:
    """Stack ``1 x n`` nodes into a ``b x n`` matrix."""
    if not rows:
        raise ShapeError("stack_rows: nothing to stack")
    width = rows[0].shape[1]
    for r in rows:
        if r.shape != (1, width):
            raise ShapeError(f"stack_rows: expected (1, {width}), got {r.shape}")
        if r.tape is not rows[0].tape:
            raise GraphError("stack_rows: operands live on different tapes")
    return rows[0].tape.record("stack_rows", np.vstack([r.value for r in rows]), rows)


def rowwise_softmax(x: Node) -> Node:
    """Softmax of each row, computed with max-subtraction."""
    z = x.value - x.value.max(axis=1, keepdims=True)
    e = np.exp(z)
    return x.tape.record("rowwise_softmax", e / e.sum(axis=1, keepdims=True), (x,))


def log_softmax_rows(x: Node) -> Node:
    """Row-wise log-softmax via log-sum-exp."""
    m = x.value.max(axis=1, keepdims=True)
    lse = m + np.log(np.exp(x.value - m).sum(axis=1, keepdims=True))
    return x.tape.record("log_softmax_rows", x.value - lse, (x,))


def masked_log_softmax_rows(x: Node, mask: Matrix) -> Node:
    """``x[i, j] - log sum_{k: mask[i, k]} exp(x[i, k])`` for every entry.

    Rows with an empty mask are an error. Entries outside the mask are still
    produced; callers weight them by zero.
    """
    mask = np.asarray(mask, dtype=bool)
    if mask.shape != x.value.shape:
        raise ShapeError(f"masked_log_softmax_rows: mask {mask.shape} vs input {x.shape}")
    if not np.all(mask.any(axis=1)):
        raise DegenerateInputError("masked_log_softmax_rows: a row has an empty mask")
    masked = np.where(mask, x.value, -np.inf)
    m = masked.max(axis=1, keepdims=True)
    lse = m + np.log(np.where(mask, np.exp(masked - m), 0.0).sum(axis=1, keepdims=True))
    return x.tape.record("masked_log_softmax_rows", x.value - lse, (x,), mask=mask)


def l2_normalize_rows(x: Node) -> Node:
    """Scale each row to unit Euclidean norm.

    :raises DegenerateInputError: If a row has zero norm.
    """
    norms = np.sqrt((x.value * x.value).sum(axis=1, keepdims=True))
    if np.any(norms == 0.0):
        raise DegenerateInputError("l2_normalize_rows: cannot normalize a zero row")
    return x.tape.record("l2_normalize_rows", x.value / norms, (x,), norms=norms)


_UNARY = {
    "tanh": tanh,
    "sigmoid": sigmoid,
    "log": log,
    "exp": exp,
    "l2_normalize_rows": l2_normalize_rows,
}

_BINARY = {"hadamard": hadamard, "add": add}


def elementwise(kind: ElementwiseKind, *args: Any) -> Node:
    """Dispatch one of the elementwise kinds by name.

    ``scale`` takes ``(node, factor)``; binary kinds take two nodes.
    """
    if kind in _UNARY:
        (x,) = args
        return _UNARY[kind](x)
    if kind in _BINARY:
        a, b = args
        return _BINARY[kind](a, b)
    if kind == "scale":
        x, factor = args
        return scale(x, factor)
    raise ValueError(f"unknown elementwise kind: {kind!r}")
