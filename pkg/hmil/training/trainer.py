"""Mini-batch training loop.

:func:`fit` is the loop shared by every model kind: seeded shuffling, batches
of at most ``batch_size`` bags (the last incomplete batch is kept), one Adam
step per batch, validation scoring after every epoch and selection of the
best epoch. :func:`train` plugs the dual-branch losses into it.
"""

import contextlib
import json
from dataclasses import replace
from pathlib import Path
from typing import (
    IO,
    Any,
    Callable,
    Dict,
    Iterator,
    List,
    Mapping,
    Optional,
    Protocol,
    Sequence,
    Tuple,
    TypeVar,
    Union,
)

import numpy as np

from shared.errors import CompatibilityError, DatasetError, NumericError
from shared.logging import get_logger

from ..data.models import Dataset, FeatureBag, Split
from ..evaluation.metrics import confusion_metrics, hierarchy_consistency, macro_auc_or_none
from ..hierarchy import Taxonomy, projection_matrix
from ..losses import (
    COMPONENTS,
    bag_alignment,
    combine_nodes,
    cross_entropy,
    instance_alignment,
    loss_weights,
    supcon,
)
from ..model.network import HmilModel, forward, predict
from ..tensor import ops
from ..tensor.autograd import backward
from ..tensor.engine import Matrix, Node, Tape
from .models import EpochRecord, TrainConfig, TrainHistory
from .optimizer import adam_step, init_adam_state


logger = get_logger(__name__)


class Trainable(Protocol):
    params: Dict[str, Matrix]

    def copy(self) -> Any: ...


ModelT = TypeVar("ModelT", bound=Trainable)

ComponentBuilder = Callable[[Any, Tape, Sequence[FeatureBag]], Dict[str, Node]]
Scorer = Callable[[Any, Sequence[FeatureBag]], Dict[str, Optional[float]]]
WeightSchedule = Callable[[int], Tuple[Dict[str, float], Optional[float]]]


def mean_of(nodes: Sequence[Node]) -> Node:
    """Average of ``1x1`` nodes, summed in the given order."""
    total = nodes[0]
    for node in nodes[1:]:
        total = ops.add(total, node)
    return ops.scale(total, 1.0 / len(nodes))


def _checked_values(components: Mapping[str, Node], epoch: int, batch: int) -> Dict[str, float]:
    values: Dict[str, float] = {}
    for name, node in components.items():
        value = node.item()
        if not np.isfinite(value):
            logger.error(f"Non-finite {name} loss ({value}) at epoch {epoch}, batch {batch}")
            raise NumericError(f"non-finite {name} loss at epoch {epoch}, batch {batch}")
        values[name] = value
    return values


@contextlib.contextmanager
def _history_log(path: Optional[Union[str, Path]]) -> Iterator[Optional[IO[str]]]:
    if path is None:
        yield None
        return
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", encoding="utf-8") as fh:
        yield fh


def fit(
    model: ModelT,
    dataset: Dataset,
    cfg: TrainConfig,
    *,
    build_components: ComponentBuilder,
    score: Scorer,
    weights_for: WeightSchedule,
    columns: Sequence[str],
    select_key: str,
    log_path: Optional[Union[str, Path]] = None,
) -> Tuple[ModelT, TrainHistory]:
    """Run the training loop and return the best model with its history.

    :param build_components: Records the loss components of one batch on a
                             tape and returns them by name.
    :param score: Validation metrics of a model on a list of bags.
    :param weights_for: Component weights and ``beta`` of an epoch.
    :param columns: Component names recorded in the history; components the
                    builder omits are recorded as 0.
    :param select_key: Validation metric maximized by the returned model.
    :param log_path: Optional JSON-lines file receiving one record per epoch.
    :raises DatasetError: If the train or validation split is empty.
    :raises NumericError: If a loss component turns non-finite.
    """
    train_bags = dataset.split(Split.TRAIN)
    val_bags = dataset.split(Split.VAL)
    if not train_bags:
        raise DatasetError("empty split: no training bags")
    if not val_bags:
        raise DatasetError("empty split: no validation bags")

    rng = np.random.default_rng(cfg.seed)
    state = init_adam_state(model.params)
    history = TrainHistory(select_metric=select_key)
    best_model = model.copy()
    best_value: Optional[float] = None

    with _history_log(log_path) as log_fh:
        for epoch in range(cfg.epochs):
            weights, beta = weights_for(epoch)
            order = rng.permutation(len(train_bags))
            sums = {name: 0.0 for name in columns}
            loss_sum = 0.0
            n_batches = 0
            for start in range(0, len(order), cfg.batch_size):
                batch = [train_bags[i] for i in order[start : start + cfg.batch_size]]
                tape = Tape()
                components = build_components(model, tape, batch)
                values = _checked_values(components, epoch, n_batches)
                loss = combine_nodes(components, weights)
                reachable = tape.reachable_parameters(loss)
                grads_by_id = backward(loss, list(reachable.values()))
                grads = {name: grads_by_id[node.id] for name, node in reachable.items()}
                new_params, state = adam_step(
                    model.params,
                    grads,
                    state,
                    lr=cfg.learning_rate,
                    wd=cfg.weight_decay,
                    beta1=cfg.adam_beta1,
                    beta2=cfg.adam_beta2,
                    eps=cfg.adam_eps,
                    decoupled=cfg.decoupled_weight_decay,
                )
                model = replace(model, params=new_params)  # type: ignore[type-var]
                for name in columns:
                    sums[name] += values.get(name, 0.0)
                loss_sum += loss.item()
                n_batches += 1
                logger.debug(
                    f"epoch {epoch} batch {n_batches}: size={len(batch)} loss={loss.item():.6f}"
                )

            record = EpochRecord(
                epoch=epoch,
                beta=beta,
                loss=loss_sum / n_batches,
                components={name: sums[name] / n_batches for name in columns},
                validation=score(model, val_bags),
            )
            history.records.append(record)
            value = record.validation.get(select_key)
            if epoch == 0 or (value is not None and (best_value is None or value > best_value)):
                best_model = model.copy()
                best_value = value
                history.best_epoch = epoch
            if log_fh is not None:
                log_fh.write(json.dumps(record.to_log_record(), sort_keys=True) + "\n")
                log_fh.flush()

            parts = " ".join(f"{k}={v:.4f}" for k, v in record.components.items())
            beta_text = f" beta={beta:.4f}" if beta is not None else ""
            metric_text = f"{value:.4f}" if value is not None else "n/a"
            logger.info(
                f"Epoch {epoch + 1}/{cfg.epochs}: loss={record.loss:.4f} {parts}{beta_text} "
                f"{select_key}={metric_text}"
            )

    logger.info(f"Best epoch {history.best_epoch} by {select_key}={best_value}")
    return best_model, history


def hmil_components(
    model: HmilModel,
    tape: Tape,
    bags: Sequence[FeatureBag],
    P: Matrix,
    cfg: TrainConfig,
) -> Dict[str, Node]:
    """Batch loss components of the dual-branch model.

    Cross-entropies and alignment terms are averaged over the bags of the
    batch; the contrastive term is computed once over the whole batch.
    """
    outs = [forward(model, bag.features, tape) for bag in bags]
    components: Dict[str, Node] = {
        "ce_f": mean_of([cross_entropy(o.logits_f, b.y_f) for o, b in zip(outs, bags)])
    }
    if cfg.coarse_branch:
        components["ce_c"] = mean_of([cross_entropy(o.logits_c, b.y_c) for o, b in zip(outs, bags)])
        if cfg.ham:
            components["ia"] = mean_of([instance_alignment(o.A_c, o.A_f, P) for o in outs])
        if cfg.hba:
            components["ba"] = mean_of([bag_alignment(o.p_f, b.y_c, P) for o, b in zip(outs, bags)])

    reg_terms: List[Node] = []
    if cfg.scl:
        reg_terms.append(supcon([o.B_f for o in outs], [b.y_f for b in bags], cfg.tau))
    if cfg.scl_coarse and cfg.coarse_branch:
        reg_terms.append(supcon([o.B_c for o in outs], [b.y_c for b in bags], cfg.tau))
    if reg_terms:
        reg = reg_terms[0]
        for term in reg_terms[1:]:
            reg = ops.add(reg, term)
        components["reg"] = reg
    return components


def hmil_scores(model: HmilModel, bags: Sequence[FeatureBag], P: Matrix) -> Dict[str, Optional[float]]:
    """Validation metrics of the dual-branch model."""
    p_c, p_f = predict(model, [b.features for b in bags])
    y_f = [b.y_f for b in bags]
    y_c = [b.y_c for b in bags]
    return {
        "val_fine_macro_auc": macro_auc_or_none(y_f, p_f),
        "val_fine_f1": confusion_metrics(y_f, np.argmax(p_f, axis=1), p_f.shape[1]).macro_f1,
        "val_coarse_macro_auc": macro_auc_or_none(y_c, p_c),
        "val_consistency": hierarchy_consistency(p_c, p_f, P),
    }


def check_compatible(model: HmilModel, dataset: Dataset, taxonomy: Taxonomy) -> None:
    cfg = model.config
    if cfg.n_coarse != taxonomy.n_coarse:
        raise CompatibilityError(f"n_coarse: model {cfg.n_coarse} vs taxonomy {taxonomy.n_coarse}")
    if cfg.n_fine != taxonomy.n_fine:
        raise CompatibilityError(f"n_fine: model {cfg.n_fine} vs taxonomy {taxonomy.n_fine}")
    if cfg.d_c != dataset.d_c:
        raise CompatibilityError(f"d_c: model {cfg.d_c} vs dataset {dataset.d_c}")


def train(
    model: HmilModel,
    dataset: Dataset,
    taxonomy: Taxonomy,
    cfg: TrainConfig,
    log_path: Optional[Union[str, Path]] = None,
) -> Tuple[HmilModel, TrainHistory]:
    """Train the dual-branch model with the configured loss scheme.

    Epoch ``e`` weights the components with ``beta = 1 - e/E`` (dynamic and
    coarse-focus schemes) or the fixed static weights.

    :returns: The parameters of the best validation epoch and the history.
    :raises CompatibilityError: If the model does not fit the taxonomy or the
                                feature width.
    """
    cfg = TrainConfig.model_validate(cfg)
    check_compatible(model, dataset, taxonomy)
    P = projection_matrix(taxonomy)
    logger.info(
        f"Training hmil for {cfg.epochs} epochs (loss={cfg.loss_mode.label()}, tau={cfg.tau}, "
        f"batch={cfg.batch_size}, lr={cfg.learning_rate}, seed={cfg.seed})"
    )
    return fit(
        model,
        dataset,
        cfg,
        build_components=lambda m, tape, bags: hmil_components(m, tape, bags, P, cfg),
        score=lambda m, bags: hmil_scores(m, bags, P),
        weights_for=lambda epoch: loss_weights(cfg.loss_mode, epoch, cfg.epochs),
        columns=COMPONENTS,
        select_key=f"val_{cfg.select_metric}",
        log_path=log_path,
    )
