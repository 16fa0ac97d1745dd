"""Flat MIL baselines: mean pooling, max pooling and single-head gated attention.

Each baseline pools a bag into one ``1 x d`` vector and applies a linear head
``d -> K``. They are trained with cross-entropy on a single label level and
share the training loop of :mod:`hmil.training.trainer`.
"""

from dataclasses import dataclass
from pathlib import Path
from typing import Dict, List, Literal, Optional, Sequence, Tuple, Union

import numpy as np
from pydantic import BaseModel, Field

from shared.errors import CompatibilityError, ShapeError
from shared.logging import get_logger

from .data.models import Dataset, FeatureBag
from .evaluation.metrics import confusion_metrics, macro_auc_or_none
from .losses import cross_entropy
from .model.network import Params, bind, gated_attention, uniform_init
from .tensor import ops
from .tensor.engine import Matrix, Node, Tape, as_matrix
from .training.models import TrainConfig, TrainHistory
from .training.trainer import fit, mean_of


logger = get_logger(__name__)

FlatVariant = Literal["mean", "max", "abmil"]


class FlatConfig(BaseModel):
    """Shape and seed of a flat baseline.

    Parameters
    ----------
    variant:
        Pooling operator: ``mean``, ``max`` or ``abmil``.
    d:
        Instance feature width.
    n_classes:
        Number of classes of the head.
    label_level:
        Label space the head predicts: ``fine`` or ``coarse``.
    attention_hidden:
        Hidden width of the ``abmil`` attention. Default: ``max(1, d / 4)``.
    seed:
        Initialization seed (unsigned 64-bit).
    """

    variant: FlatVariant = "abmil"
    d: int = Field(ge=1)
    n_classes: int = Field(ge=1)
    label_level: Literal["fine", "coarse"] = "fine"
    attention_hidden: Optional[int] = Field(default=None, ge=1)
    seed: int = Field(default=0, ge=0, lt=2**64)

    @property
    def hidden_width(self) -> int:
        return self.attention_hidden if self.attention_hidden is not None else max(1, self.d // 4)


@dataclass
class FlatModel:
    config: FlatConfig
    params: Params

    def copy(self) -> "FlatModel":
        return FlatModel(config=self.config, params={k: v.copy() for k, v in self.params.items()})


@dataclass(frozen=True)
class FlatOutput:
    bag: Node
    logits: Node
    probs: Node
    attention: Optional[Node] = None


def flat_parameter_shapes(cfg: FlatConfig) -> List[Tuple[str, Tuple[int, int]]]:
    shapes: List[Tuple[str, Tuple[int, int]]] = []
    if cfg.variant == "abmil":
        a = cfg.hidden_width
        shapes += [("att.v1", (cfg.d, a)), ("att.v2", (cfg.d, a)), ("att.w", (a, 1))]
    shapes += [("head.w", (cfg.d, cfg.n_classes)), ("head.b", (1, cfg.n_classes))]
    return shapes


def init_flat(cfg: FlatConfig) -> FlatModel:
    cfg = FlatConfig.model_validate(cfg)
    return FlatModel(config=cfg, params=uniform_init(flat_parameter_shapes(cfg), cfg.seed))


def flat_graph(model: FlatModel, h: Union[Node, Matrix], tape: Optional[Tape] = None) -> FlatOutput:
    """Record the pooled bag vector, logits and probabilities of one bag."""
    tape = tape if tape is not None else (h.tape if isinstance(h, Node) else Tape())
    x = h if isinstance(h, Node) else tape.constant(h)
    cfg = model.config
    if x.shape[0] < 1 or x.shape[1] != cfg.d:
        raise ShapeError(f"flat_forward: expected N x {cfg.d} features, got {x.shape}")
    nodes = bind(tape, model.params)

    attention: Optional[Node] = None
    if cfg.variant == "mean":
        bag = ops.mean_rows(x)
    elif cfg.variant == "max":
        bag = ops.max_rows(x)
    else:
        attention = gated_attention(x, nodes["att.v1"], nodes["att.v2"], nodes["att.w"])
        bag = ops.matmul(attention, x)
    logits = ops.add_row(ops.matmul(bag, nodes["head.w"]), nodes["head.b"])
    return FlatOutput(bag=bag, logits=logits, probs=ops.rowwise_softmax(logits), attention=attention)


def flat_forward(model: FlatModel, h: Matrix) -> np.ndarray:
    """Class probabilities (length ``K``) of one bag."""
    return flat_graph(model, as_matrix(h, name="features")).probs.value[0].copy()


def flat_predict(model: FlatModel, features: Sequence[Matrix]) -> Matrix:
    """Stacked ``n x K`` probabilities over a list of bags."""
    return np.vstack([flat_forward(model, h) for h in features])


def _label(bag: FeatureBag, level: str) -> int:
    return bag.y_f if level == "fine" else bag.y_c


def _flat_scores(model: FlatModel, bags: Sequence[FeatureBag], level: str) -> Dict[str, Optional[float]]:
    probs = flat_predict(model, [b.features for b in bags])
    y = [_label(b, level) for b in bags]
    return {
        f"val_{level}_macro_auc": macro_auc_or_none(y, probs),
        f"val_{level}_f1": confusion_metrics(y, np.argmax(probs, axis=1), probs.shape[1]).macro_f1,
    }


def train_flat(
    model: FlatModel,
    dataset: Dataset,
    cfg: TrainConfig,
    log_path: Optional[Union[str, Path]] = None,
) -> Tuple[FlatModel, TrainHistory]:
    """Train a baseline with cross-entropy at the model's label level.

    The history records a single ``ce_f`` (or ``ce_c``) column and no
    schedule coefficient.

    :raises CompatibilityError: If the head size or feature width does not
                                match the dataset.
    """
    cfg = TrainConfig.model_validate(cfg)
    level = model.config.label_level
    k = dataset.taxonomy.n_fine if level == "fine" else dataset.taxonomy.n_coarse
    if model.config.n_classes != k:
        raise CompatibilityError(f"n_classes: model {model.config.n_classes} vs {level} classes {k}")
    if model.config.d != dataset.d_c:
        raise CompatibilityError(f"d: model {model.config.d} vs dataset {dataset.d_c}")

    column = "ce_f" if level == "fine" else "ce_c"
    metric = "macro_auc" if cfg.select_metric == "fine_macro_auc" else "f1"

    def build(m: FlatModel, tape: Tape, bags: Sequence[FeatureBag]) -> Dict[str, Node]:
        terms = [cross_entropy(flat_graph(m, b.features, tape).logits, _label(b, level)) for b in bags]
        return {column: mean_of(terms)}

    logger.info(
        f"Training {model.config.variant} baseline on {level} labels for {cfg.epochs} epochs "
        f"(batch={cfg.batch_size}, lr={cfg.learning_rate}, seed={cfg.seed})"
    )
    return fit(
        model,
        dataset,
        cfg,
        build_components=build,
        score=lambda m, bags: _flat_scores(m, bags, level),
        weights_for=lambda epoch: ({column: 1.0}, None),
        columns=(column,),
        select_key=f"val_{level}_{metric}",
        log_path=log_path,
    )
