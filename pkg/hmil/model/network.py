"""Dual-branch hierarchical MIL network.

Pipeline for one bag of ``N`` instances::

  h_c (N x d_c) --OFR--> h_f (N x d_f)
  A_c = gated_attention(h_c)  (K_c x N)      A_f = gated_attention(h_f)  (K_f x N)
  B_c = A_c @ h_c             (K_c x d_c)    B_f = A_f @ h_f             (K_f x d_f)
  p_c = softmax(cls_c(B_c))                  p_f = softmax(cls_f(B_f))

Parameters are plain float64 arrays keyed by name; every forward call records
them as leaves of a :class:`~hmil.tensor.engine.Tape` so losses can be
differentiated with :func:`~hmil.tensor.autograd.backward`.
"""

from dataclasses import dataclass
from typing import Dict, Iterable, List, Mapping, Optional, Sequence, Tuple, Union

import numpy as np

from shared.errors import ShapeError

from ..tensor import ops
from ..tensor.engine import Matrix, Node, Tape, as_matrix
from .models import HmilConfig


Params = Dict[str, Matrix]


@dataclass
class HmilModel:
    """All learnable parameters of both branches.

    :ivar config: Shapes and seed the parameters were created from.
    :ivar params: Parameter arrays keyed by name (``ofr.w1``, ``att_c.v1``, ...).
    """

    config: HmilConfig
    params: Params

    def copy(self) -> "HmilModel":
        return HmilModel(config=self.config, params={k: v.copy() for k, v in self.params.items()})


@dataclass(frozen=True)
class ForwardOutput:
    """Graph nodes produced by :func:`forward` for one bag."""

    h_f: Node
    A_c: Node
    A_f: Node
    B_c: Node
    B_f: Node
    logits_c: Node
    logits_f: Node
    p_c: Node
    p_f: Node


def _attention_width(d: int) -> int:
    return max(1, d // 4)


def parameter_shapes(cfg: HmilConfig) -> List[Tuple[str, Tuple[int, int]]]:
    """Names and shapes of every parameter, in initialization order."""
    d_c, d_f = cfg.d_c, cfg.fine_width
    a_c, a_f = _attention_width(d_c), _attention_width(d_f)
    shapes: List[Tuple[str, Tuple[int, int]]] = []
    if cfg.use_ofr:
        h = cfg.hidden_width
        shapes += [
            ("ofr.w1", (d_c, h)),
            ("ofr.b1", (1, h)),
            ("ofr.w2", (h, d_f)),
            ("ofr.b2", (1, d_f)),
        ]
    shapes += [
        ("att_c.v1", (d_c, a_c)),
        ("att_c.v2", (d_c, a_c)),
        ("att_c.w", (a_c, cfg.n_coarse)),
        ("att_f.v1", (d_f, a_f)),
        ("att_f.v2", (d_f, a_f)),
        ("att_f.w", (a_f, cfg.n_fine)),
        ("cls_c.w", (cfg.n_coarse, d_c)),
        ("cls_c.b", (1, cfg.n_coarse)),
        ("cls_f.w", (cfg.n_fine, d_f)),
        ("cls_f.b", (1, cfg.n_fine)),
    ]
    return shapes


def uniform_init(
    shapes: Iterable[Tuple[str, Tuple[int, int]]], seed: int
) -> Params:
    """Fan-based uniform weights; names ending in ``.b`` (biases) start at zero.

    Each weight is drawn from ``U(-s, s)`` with ``s = sqrt(6 / (fan_in + fan_out))``.
    """
    rng = np.random.default_rng(seed)
    params: Params = {}
    for name, (rows, cols) in shapes:
        if name.rsplit(".", 1)[-1].startswith("b"):
            params[name] = np.zeros((rows, cols))
            continue
        s = np.sqrt(6.0 / (rows + cols))
        params[name] = rng.uniform(-s, s, size=(rows, cols))
    return params


def init_model(cfg: HmilConfig) -> HmilModel:
    """Create a model with deterministic, seed-driven initial parameters."""
    cfg = HmilConfig.model_validate(cfg)
    return HmilModel(config=cfg, params=uniform_init(parameter_shapes(cfg), cfg.seed))


def bind(tape: Tape, params: Mapping[str, Matrix]) -> Dict[str, Node]:
    """Register every parameter array on ``tape`` (idempotent per tape)."""
    return {name: tape.parameter(name, value) for name, value in params.items()}


def _as_node(tape: Tape, x: Union[Node, Matrix]) -> Node:
    if isinstance(x, Node):
        return x
    return tape.constant(x)


def ofr_forward(nodes: Mapping[str, Node], h_c: Node) -> Node:
    """Two-layer perceptron ``tanh(h W1 + b1) W2 + b2`` applied per instance."""
    w1 = nodes["ofr.w1"]
    if h_c.shape[1] != w1.shape[0]:
        raise ShapeError(f"ofr_forward: features {h_c.shape} do not match d_c={w1.shape[0]}")
    hidden = ops.tanh(ops.add_row(ops.matmul(h_c, w1), nodes["ofr.b1"]))
    return ops.add_row(ops.matmul(hidden, nodes["ofr.w2"]), nodes["ofr.b2"])


def gated_attention(h: Node, V1: Node, V2: Node, W: Node) -> Node:
    """Class-wise gated attention, one distribution over instances per class.

    ``A = softmax_rows(((tanh(h V1) * sigmoid(h V2)) W)^T)`` with shape ``K x N``.
    """
    if h.shape[1] != V1.shape[0] or h.shape[1] != V2.shape[0]:
        raise ShapeError(
            f"gated_attention: features {h.shape} vs V1 {V1.shape} / V2 {V2.shape}"
        )
    gate = ops.hadamard(ops.tanh(ops.matmul(h, V1)), ops.sigmoid(ops.matmul(h, V2)))
    scores = ops.matmul(gate, W)
    return ops.rowwise_softmax(ops.transpose(scores))


def attention_pool(A: Node, h: Node) -> Node:
    """Bag representation ``B = A @ h`` (``K x d``)."""
    if A.shape[1] != h.shape[0]:
        raise ShapeError(f"attention_pool: attention {A.shape} vs features {h.shape}")
    return ops.matmul(A, h)


def classify(B: Node, weight: Node, bias: Node) -> Node:
    """Class-wise heads: ``logit_k = weight[k] . B[k] + bias[k]`` (``1 x K``)."""
    if weight.shape != B.shape:
        raise ShapeError(f"classify: heads {weight.shape} vs bag representation {B.shape}")
    per_class = ops.transpose(ops.sum_rows(ops.hadamard(weight, B)))
    return ops.add_row(per_class, bias)


def forward(
    model: HmilModel,
    h_c: Union[Node, Matrix],
    tape: Optional[Tape] = None,
) -> ForwardOutput:
    """Run both branches on one bag.

    :param model: Model whose parameters are bound to ``tape``.
    :param h_c: ``N x d_c`` instance features (array or node).
    :param tape: Tape to record on; a fresh one when omitted.
    :returns: Nodes for attentions, bag representations, logits and
              probabilities.
    """
    tape = tape if tape is not None else (h_c.tape if isinstance(h_c, Node) else Tape())
    h = _as_node(tape, h_c)
    cfg = model.config
    if h.shape[0] < 1 or h.shape[1] != cfg.d_c:
        raise ShapeError(f"forward: expected N x {cfg.d_c} features, got {h.shape}")
    nodes = bind(tape, model.params)

    h_f = ofr_forward(nodes, h) if cfg.use_ofr else h
    A_c = gated_attention(h, nodes["att_c.v1"], nodes["att_c.v2"], nodes["att_c.w"])
    A_f = gated_attention(h_f, nodes["att_f.v1"], nodes["att_f.v2"], nodes["att_f.w"])
    B_c = attention_pool(A_c, h)
    B_f = attention_pool(A_f, h_f)
    logits_c = classify(B_c, nodes["cls_c.w"], nodes["cls_c.b"])
    logits_f = classify(B_f, nodes["cls_f.w"], nodes["cls_f.b"])
    return ForwardOutput(
        h_f=h_f,
        A_c=A_c,
        A_f=A_f,
        B_c=B_c,
        B_f=B_f,
        logits_c=logits_c,
        logits_f=logits_f,
        p_c=ops.rowwise_softmax(logits_c),
        p_f=ops.rowwise_softmax(logits_f),
    )


def predict(model: HmilModel, features: Sequence[Matrix]) -> Tuple[Matrix, Matrix]:
    """Coarse and fine probabilities for each bag, stacked row-wise.

    :returns: ``(p_c, p_f)`` with shapes ``n x K_c`` and ``n x K_f``.
    """
    p_c_rows: List[Matrix] = []
    p_f_rows: List[Matrix] = []
    for h in features:
        out = forward(model, as_matrix(h, name="features"))
        p_c_rows.append(out.p_c.value[0])
        p_f_rows.append(out.p_f.value[0])
    return np.vstack(p_c_rows), np.vstack(p_f_rows)
