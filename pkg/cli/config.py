"""Run configuration documents.

A run is described by one JSON document validated into :class:`RunConfig`.
Relative ``taxonomy`` and ``dataset`` paths are resolved against the
directory of the document; command-line flags then override individual
fields, and the fully resolved document is written to ``<out>/run.json``.
"""

import json
from pathlib import Path
from typing import Any, Dict, List, Literal, Optional, Union

from pydantic import BaseModel, Field, model_validator

from hmil.data.models import SyntheticConfig
from hmil.data.splits import KFoldSplit, RatioSplit
from hmil.hierarchy import TaxonomySpec, load_taxonomy, preset_taxonomy
from hmil.training.models import TrainConfig
from shared.errors import ConfigError


ModelKind = Literal["hmil", "mean", "max", "abmil"]

DEFAULT_TAXONOMY = TaxonomySpec(
    coarse=["benign", "malignant"],
    fine=["normal", "benign_lesion", "in_situ", "invasive"],
    parent={
        "normal": "benign",
        "benign_lesion": "benign",
        "in_situ": "malignant",
        "invasive": "malignant",
    },
)


class ModelOptions(BaseModel):
    """Architecture options; widths and class counts come from the dataset."""

    d_f: Optional[int] = Field(default=None, ge=1)
    ofr_hidden: Optional[int] = Field(default=None, ge=1)
    use_ofr: bool = True
    attention_hidden: Optional[int] = Field(default=None, ge=1)


class EvalOptions(BaseModel):
    bootstrap: int = Field(default=1000, ge=0)
    split: Literal["train", "val", "test"] = "test"


class GradcheckOptions(BaseModel):
    """Size of the synthetic problem ``gradcheck`` differentiates.

    ``max_instances`` and ``d_c`` are capped so the finite-difference sweep
    stays small.
    """

    d_c: int = Field(default=16, ge=4, le=32)
    max_instances: int = Field(default=8, ge=2, le=16)
    bags_per_fine_class: int = Field(default=2, ge=1, le=4)
    epsilon: float = Field(default=1e-5, gt=0.0)
    threshold: float = Field(default=1e-4, gt=0.0)
    epoch: int = Field(default=1, ge=0)
    epochs: int = Field(default=4, ge=1)

    @model_validator(mode="after")
    def epoch_must_fit(self) -> "GradcheckOptions":
        if self.epoch >= self.epochs:
            raise ValueError(f"epoch {self.epoch} outside [0, {self.epochs})")
        if self.d_c % 4 != 0:
            raise ValueError(f"d_c ({self.d_c}) must be divisible by 4")
        return self


class CompareOptions(BaseModel):
    variants: List[str] = Field(default_factory=lambda: ["full", "no-ham", "no-hba", "abmil"])
    seeds: List[int] = Field(default_factory=lambda: [0, 1, 2], min_length=1)
    workers: Optional[int] = Field(default=None, ge=1)


class RunConfig(BaseModel):
    """Unified configuration of a CLI run.

    Parameters
    ----------
    out:
        Output directory.
    seed:
        Run seed driving model initialization, shuffling, splits and the
        bootstrap.
    taxonomy:
        Taxonomy file path or preset name (``panda``, ``bracs``); fills in
        the synthetic section when it names no taxonomy.
    dataset:
        Manifest path. When absent the synthetic section is generated in
        memory.
    synthetic:
        Synthetic generator configuration.
    split:
        Ratio or k-fold split scheme.
    resplit:
        Re-assign splits even when every loaded bag already carries a tag.
    stratify_on:
        Label level used to stratify splits.
    model:
        ``hmil`` or one of the flat baselines.
    model_options:
        Architecture options.
    train, eval, gradcheck, compare:
        Per-command sections.
    """

    out: str = "runs/default"
    seed: int = Field(default=0, ge=0, lt=2**64)
    taxonomy: Optional[str] = None
    dataset: Optional[str] = None
    synthetic: Optional[SyntheticConfig] = None
    split: Union[RatioSplit, KFoldSplit] = Field(default_factory=RatioSplit, discriminator="kind")
    resplit: bool = False
    stratify_on: Literal["fine", "coarse"] = "fine"
    model: ModelKind = "hmil"
    model_options: ModelOptions = Field(default_factory=ModelOptions)
    train: TrainConfig = Field(default_factory=TrainConfig)
    eval: EvalOptions = Field(default_factory=EvalOptions)
    gradcheck: GradcheckOptions = Field(default_factory=GradcheckOptions)
    compare: CompareOptions = Field(default_factory=CompareOptions)

    def resolved_dump(self) -> Dict[str, Any]:
        return self.model_dump(mode="json")


def _is_taxonomy_file(ref: str) -> bool:
    return ref.lower().endswith(".json")


def _taxonomy_spec(ref: Optional[str]) -> TaxonomySpec:
    if not ref:
        return DEFAULT_TAXONOMY
    if _is_taxonomy_file(ref):
        return load_taxonomy(ref).to_spec()
    return preset_taxonomy(ref).to_spec()


def _resolve_path(value: str, base: Path, key: str) -> str:
    path = Path(value)
    if not path.is_absolute():
        path = base / path
    if not path.exists():
        raise FileNotFoundError(f"{key} not found: {path}")
    return str(path)


def resolve_run_config(raw: Dict[str, Any], base_dir: Optional[Path] = None) -> RunConfig:
    """Resolve paths in a raw document and validate it.

    :raises FileNotFoundError: If a referenced taxonomy or manifest is missing.
    :raises pydantic.ValidationError: If a field violates its constraints.
    """
    raw = dict(raw)
    base = base_dir or Path.cwd()
    if raw.get("dataset"):
        raw["dataset"] = _resolve_path(raw["dataset"], base, "dataset")
    if raw.get("taxonomy") and _is_taxonomy_file(raw["taxonomy"]):
        raw["taxonomy"] = _resolve_path(raw["taxonomy"], base, "taxonomy")

    synthetic = raw.get("synthetic")
    if synthetic is None and not raw.get("dataset"):
        synthetic = {}
    if isinstance(synthetic, dict) and "taxonomy" not in synthetic:
        synthetic = {**synthetic, "taxonomy": _taxonomy_spec(raw.get("taxonomy")).model_dump()}
    if synthetic is not None:
        raw["synthetic"] = synthetic
    return RunConfig.model_validate(raw)


def load_run_config(path: Optional[Union[str, Path]]) -> RunConfig:
    """Load a run document, or the defaults when ``path`` is ``None``.

    :raises FileNotFoundError: If ``path`` does not exist.
    :raises ConfigError: If the document is not a JSON object.
    """
    if path is None:
        return resolve_run_config({})
    path = Path(path)
    try:
        raw = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: invalid JSON ({exc})") from exc
    if isinstance(raw, dict) and "command" in raw and isinstance(raw.get("config"), dict):
        # a run.json record: replay its resolved configuration
        raw = raw["config"]
    if not isinstance(raw, dict):
        raise ConfigError(f"{path}: run configuration must be a JSON object")
    return resolve_run_config(raw, base_dir=path.parent)


def apply_overrides(cfg: RunConfig, overrides: Dict[str, Any]) -> RunConfig:
    """Return ``cfg`` with the non-``None`` overrides applied and revalidated.

    Keys are dotted field paths (``train.tau``); values of ``None`` are
    ignored.
    """
    data = cfg.model_dump(mode="json")
    for dotted, value in overrides.items():
        if value is None:
            continue
        node = data
        *parents, leaf = dotted.split(".")
        for key in parents:
            node = node.setdefault(key, {})
        node[leaf] = value
    return RunConfig.model_validate(data)
