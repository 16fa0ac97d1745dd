"""Typed models for training runs: configuration and per-epoch history."""

import json
from pathlib import Path
from typing import Any, Dict, List, Literal, Optional, Union

from pydantic import BaseModel, Field, field_validator

from ..losses import LossMode


class TrainConfig(BaseModel):
    """Hyper-parameters and module switches of a training run.

    Parameters
    ----------
    epochs:
        Number of epochs ``E``.
    batch_size:
        Bags per optimizer step ``b``; the last incomplete batch is kept.
    learning_rate, weight_decay:
        Adam step size and weight-decay coefficient. Defaults: 1e-3 and 1e-5.
    loss_mode:
        Combination scheme; accepts the ``dynamic`` / ``static:a,b`` /
        ``coarse`` text forms.
    tau:
        Temperature of the supervised contrastive term.
    seed:
        Shuffle seed (unsigned 64-bit).
    select_metric:
        Validation metric maximized by the saved checkpoint.
    adam_beta1, adam_beta2, adam_eps:
        Adam moment decay rates and denominator epsilon.
    decoupled_weight_decay:
        Apply weight decay directly to the parameters instead of as an L2
        gradient term.
    ham, hba, scl:
        Instance alignment, bag alignment and fine-branch contrastive terms.
    scl_coarse:
        Also apply the contrastive term to coarse bag representations.
    coarse_branch:
        When false the coarse cross-entropy and both alignment terms are
        dropped, leaving a fine-branch-only model.
    label_level:
        Label space used by flat baselines.

    Examples
    --------
    .. code-block:: python

        TrainConfig(epochs=60, batch_size=32, loss_mode="static:1,0.1")
    """

    epochs: int = Field(default=200, ge=1)
    batch_size: int = Field(default=512, ge=1)
    learning_rate: float = Field(default=1e-3, gt=0.0)
    weight_decay: float = Field(default=1e-5, ge=0.0)
    loss_mode: LossMode = Field(default_factory=LossMode)
    tau: float = Field(default=0.1, gt=0.0)
    seed: int = Field(default=0, ge=0, lt=2**64)
    select_metric: Literal["fine_macro_auc", "fine_f1"] = "fine_macro_auc"
    adam_beta1: float = Field(default=0.9, ge=0.0, lt=1.0)
    adam_beta2: float = Field(default=0.999, ge=0.0, lt=1.0)
    adam_eps: float = Field(default=1e-8, gt=0.0)
    decoupled_weight_decay: bool = False
    ham: bool = True
    hba: bool = True
    scl: bool = True
    scl_coarse: bool = False
    coarse_branch: bool = True
    label_level: Literal["fine", "coarse"] = "fine"

    @field_validator("loss_mode", mode="before")
    @classmethod
    def parse_loss_mode(cls, value: Any) -> Any:
        if isinstance(value, str):
            return LossMode.parse(value)
        return value


class EpochRecord(BaseModel):
    """Aggregates of one epoch.

    ``components`` holds the batch-mean of each recorded loss component and
    ``loss`` the batch-mean total. ``validation`` maps metric names to values,
    ``None`` where a metric is undefined on the validation split.
    """

    epoch: int
    beta: Optional[float] = None
    loss: float
    components: Dict[str, float]
    validation: Dict[str, Optional[float]]

    def to_log_record(self) -> Dict[str, Any]:
        record: Dict[str, Any] = {"epoch": self.epoch, "loss": self.loss}
        if self.beta is not None:
            record["beta"] = self.beta
        record.update(self.components)
        record.update(self.validation)
        return record


class TrainHistory(BaseModel):
    """Per-epoch records and the epoch whose parameters were kept."""

    records: List[EpochRecord] = Field(default_factory=list)
    best_epoch: int = 0
    select_metric: str = "val_fine_macro_auc"

    def metric(self, name: str) -> List[Optional[float]]:
        return [r.validation.get(name) for r in self.records]

    def to_jsonl(self) -> str:
        return "".join(
            json.dumps(r.to_log_record(), sort_keys=True) + "\n" for r in self.records
        )

    def write_jsonl(self, path: Union[str, Path]) -> Path:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(self.to_jsonl(), encoding="utf-8")
        return path
