"""Helpers shared by the sub-commands: output directories, datasets, models."""

import json
from pathlib import Path
from typing import Any, Dict, Tuple, Union

from hmil.baselines import FlatConfig, FlatModel, flat_parameter_shapes, init_flat, train_flat
from hmil.data.io import load_dataset
from hmil.data.models import Dataset, Split
from hmil.data.synthetic import generate_synthetic
from hmil.data.splits import make_splits
from hmil.model.checkpoint import Checkpoint, load_checkpoint, save_checkpoint
from hmil.model.models import HmilConfig
from hmil.model.network import HmilModel, init_model, parameter_shapes
from hmil.training.models import TrainConfig, TrainHistory
from hmil.training.trainer import train
from shared.errors import CompatibilityError, ConfigError
from shared.logging import get_logger

from ..config import RunConfig


logger = get_logger(__name__)

AnyModel = Union[HmilModel, FlatModel]

CHECKPOINT_NAME = "checkpoint.hmil"
HISTORY_NAME = "history.jsonl"


def write_json(path: Path, payload: Any) -> Path:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    return path


def print_json(payload: Any) -> None:
    print(json.dumps(payload, indent=2, sort_keys=True))


def write_run_record(cfg: RunConfig, command: str) -> Path:
    """Write ``<out>/run.json`` with the resolved configuration."""
    out = Path(cfg.out)
    path = write_json(out / "run.json", {"command": command, "config": cfg.resolved_dump()})
    logger.info(f"Wrote run record to {path}")
    return path


def build_dataset(cfg: RunConfig) -> Dataset:
    """Load or generate the dataset and assign splits with the run seed.

    Splits of a loaded dataset are kept when every bag already has one,
    unless ``resplit`` is set.
    """
    if cfg.dataset:
        ds = load_dataset(cfg.dataset)
    elif cfg.synthetic is not None:
        ds = generate_synthetic(cfg.synthetic)
    else:
        raise ConfigError("no dataset: set 'dataset' or 'synthetic'")
    fully_tagged = all(b.split != Split.UNASSIGNED for b in ds.bags)
    if fully_tagged and not cfg.resplit:
        logger.info(f"Keeping stored splits: {ds.split_sizes()}")
        return ds
    return make_splits(ds, cfg.split, cfg.seed, stratify_on=cfg.stratify_on)


def train_config(cfg: RunConfig) -> TrainConfig:
    return cfg.train.model_copy(update={"seed": cfg.seed})


def build_model(cfg: RunConfig, ds: Dataset) -> AnyModel:
    taxonomy = ds.taxonomy
    opts = cfg.model_options
    if cfg.model == "hmil":
        return init_model(
            HmilConfig(
                d_c=ds.d_c,
                d_f=opts.d_f,
                n_coarse=taxonomy.n_coarse,
                n_fine=taxonomy.n_fine,
                ofr_hidden=opts.ofr_hidden,
                use_ofr=opts.use_ofr,
                seed=cfg.seed,
            )
        )
    level = cfg.train.label_level
    return init_flat(
        FlatConfig(
            variant=cfg.model,
            d=ds.d_c,
            n_classes=taxonomy.n_fine if level == "fine" else taxonomy.n_coarse,
            label_level=level,
            attention_hidden=opts.attention_hidden,
            seed=cfg.seed,
        )
    )


def fit_model(
    cfg: RunConfig, ds: Dataset, log_path: Union[str, Path, None] = None
) -> Tuple[AnyModel, TrainHistory]:
    model = build_model(cfg, ds)
    tcfg = train_config(cfg)
    if isinstance(model, HmilModel):
        return train(model, ds, ds.taxonomy, tcfg, log_path=log_path)
    return train_flat(model, ds, tcfg, log_path=log_path)


def model_kind(model: AnyModel) -> str:
    return "hmil" if isinstance(model, HmilModel) else model.config.variant


def save_model(path: Path, model: AnyModel, ds: Dataset) -> Path:
    return save_checkpoint(
        path,
        model_kind(model),
        model.config.model_dump(mode="json"),
        ds.taxonomy.to_spec().model_dump(),
        model.params,
    )


def _check_params(ckpt: Checkpoint, expected: Dict[str, Tuple[int, int]]) -> None:
    got = {name: arr.shape for name, arr in ckpt.params.items()}
    if set(got) != set(expected):
        raise CompatibilityError(
            f"params: checkpoint has {sorted(got)}, model expects {sorted(expected)}"
        )
    for name, shape in expected.items():
        if tuple(got[name]) != tuple(shape):
            raise CompatibilityError(f"params.{name}: checkpoint {got[name]} vs expected {shape}")


def restore_model(path: Union[str, Path], ds: Dataset) -> AnyModel:
    """Load a checkpoint and check it against the dataset.

    :raises CompatibilityError: Naming the first mismatched field (taxonomy,
                                feature width or a parameter shape).
    """
    ckpt = load_checkpoint(path)
    spec = ds.taxonomy.to_spec().model_dump()
    for key in ("coarse", "fine", "parent"):
        if ckpt.taxonomy.get(key) != spec[key]:
            raise CompatibilityError(
                f"taxonomy.{key}: checkpoint {ckpt.taxonomy.get(key)} vs dataset {spec[key]}"
            )
    if ckpt.kind == "hmil":
        hcfg = HmilConfig.model_validate(ckpt.config)
        if hcfg.d_c != ds.d_c:
            raise CompatibilityError(f"d_c: checkpoint {hcfg.d_c} vs dataset {ds.d_c}")
        _check_params(ckpt, dict(parameter_shapes(hcfg)))
        return HmilModel(config=hcfg, params=ckpt.params)
    if ckpt.kind in ("mean", "max", "abmil"):
        fcfg = FlatConfig.model_validate(ckpt.config)
        if fcfg.d != ds.d_c:
            raise CompatibilityError(f"d: checkpoint {fcfg.d} vs dataset {ds.d_c}")
        _check_params(ckpt, dict(flat_parameter_shapes(fcfg)))
        return FlatModel(config=fcfg, params=ckpt.params)
    raise CompatibilityError(f"kind: unknown model kind {ckpt.kind!r} in {path}")
