"""Tape-style computation graph.

A :class:`Tape` records every :class:`Node` in creation order, so parents
always precede their children and a reverse walk over the tape is a valid
topological order for reverse-mode differentiation. Node values are float64
``numpy`` arrays frozen at creation.
"""

from dataclasses import dataclass, field
from typing import Any, Dict, List, Mapping, Optional, Sequence, Set, Tuple

import numpy as np
import numpy.typing as npt

from shared.errors import GraphError, NumericError, ShapeError


Matrix = npt.NDArray[np.float64]


def as_matrix(value: Any, *, name: str = "value") -> Matrix:
    """Coerce ``value`` into a finite, read-only 2-D float64 array.

    Scalars become ``1x1`` and 1-D inputs become a single row.

    :param value: Array-like input.
    :param name: Label used in error messages.
    :returns: A new read-only ``float64`` matrix.
    :raises ShapeError: If the input has more than two dimensions.
    :raises NumericError: If any entry is NaN or infinite.
    """
    arr = np.array(value, dtype=np.float64, copy=True)
    if arr.ndim == 0:
        arr = arr.reshape(1, 1)
    elif arr.ndim == 1:
        arr = arr.reshape(1, -1)
    elif arr.ndim != 2:
        raise ShapeError(f"{name} must be at most 2-D, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise NumericError(f"{name} contains non-finite entries")
    arr.flags.writeable = False
    return arr


@dataclass(frozen=True, eq=False)
class Node:
    """One recorded value in a computation graph.

    :ivar id: Position of the node on its tape.
    :ivar value: The node's matrix value (read-only).
    :ivar op: Tag of the operation that produced the node.
    :ivar parents: Ids of the input nodes, all smaller than ``id``.
    :ivar attrs: Operation attributes needed by the backward rule.
    :ivar name: Parameter name for ``param`` nodes.
    """

    id: int
    value: Matrix
    op: str
    parents: Tuple[int, ...]
    tape: "Tape" = field(repr=False)
    attrs: Mapping[str, Any] = field(default_factory=dict, repr=False)
    name: Optional[str] = None

    @property
    def shape(self) -> Tuple[int, int]:
        return (int(self.value.shape[0]), int(self.value.shape[1]))

    def item(self) -> float:
        """Return the value of a ``1x1`` node as a Python float."""
        if self.value.shape != (1, 1):
            raise ShapeError(f"item() needs a 1x1 node, got {self.shape}")
        return float(self.value[0, 0])


class Tape:
    """Append-only record of graph nodes.

    Parameters are registered by name; registering the same name twice on one
    tape returns the existing node, so several bags of a batch share a single
    parameter leaf.
    """

    def __init__(self) -> None:
        self.nodes: List[Node] = []
        self.parameters: Dict[str, Node] = {}

    def __len__(self) -> int:
        return len(self.nodes)

    def record(
        self,
        op: str,
        value: Matrix,
        parents: Sequence[Node] = (),
        *,
        name: Optional[str] = None,
        **attrs: Any,
    ) -> Node:
        """Append a node produced by ``op`` from ``parents``."""
        for parent in parents:
            if parent.tape is not self:
                raise GraphError(f"node {parent.id} ({parent.op}) belongs to another tape")
        if value.ndim != 2:
            raise ShapeError(f"{op} produced a {value.ndim}-D value")
        if value.flags.writeable:
            value = value.copy()
            value.flags.writeable = False
        node = Node(
            id=len(self.nodes),
            value=value,
            op=op,
            parents=tuple(p.id for p in parents),
            tape=self,
            attrs=dict(attrs),
            name=name,
        )
        self.nodes.append(node)
        return node

    def constant(self, value: Any) -> Node:
        """Record a non-trainable leaf."""
        return self.record("const", as_matrix(value, name="constant"))

    def parameter(self, name: str, value: Any) -> Node:
        """Record (or fetch) the trainable leaf called ``name``."""
        existing = self.parameters.get(name)
        if existing is not None:
            return existing
        node = self.record("param", as_matrix(value, name=name), name=name)
        self.parameters[name] = node
        return node

    def ancestors(self, node: Node) -> Set[int]:
        """Return the ids of ``node`` and everything it depends on."""
        if node.tape is not self:
            raise GraphError("node belongs to another tape")
        seen: Set[int] = set()
        stack = [node.id]
        while stack:
            current = stack.pop()
            if current in seen:
                continue
            seen.add(current)
            stack.extend(self.nodes[current].parents)
        return seen

    def reachable_parameters(self, loss: Node) -> Dict[str, Node]:
        """Parameters that ``loss`` actually depends on, in registration order."""
        deps = self.ancestors(loss)
        return {name: n for name, n in self.parameters.items() if n.id in deps}
