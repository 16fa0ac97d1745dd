"""``compare``: train a grid of variants over several seeds and tabulate them.

A variant is a ``+``-joined list of tokens, each switching one module or
setting relative to the run configuration, e.g. ``no-ofr+static:1,0.1``.
"""

import csv
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence

from joblib import Parallel, delayed

from hmil.data.models import Split
from hmil.evaluation.report import evaluate_model, summarize_runs
from hmil.losses import LossMode
from shared.errors import ConfigError
from shared.logging import get_logger
from shared.settings import get_settings

from ..config import RunConfig, apply_overrides
from .common import build_dataset, fit_model, print_json, write_json, write_run_record


logger = get_logger(__name__)

SWITCHES: Dict[str, Dict[str, Any]] = {
    "full": {},
    "no-ham": {"train.ham": False},
    "no-hba": {"train.hba": False},
    "no-ham-hba": {"train.ham": False, "train.hba": False},
    "no-ofr": {"model_options.use_ofr": False},
    "no-scl": {"train.scl": False},
    "scl-coarse": {"train.scl_coarse": True},
    "fine-only": {"train.coarse_branch": False},
    "dynamic": {"train.loss_mode": "dynamic"},
    "coarse-focus": {"train.loss_mode": "coarse_focus"},
    "mean": {"model": "mean"},
    "max": {"model": "max"},
    "abmil": {"model": "abmil"},
}

TABLE_COLUMNS = (
    "variant",
    "fine_auc_mean",
    "fine_auc_std",
    "coarse_auc_mean",
    "coarse_auc_std",
    "consistency_mean",
    "consistency_std",
    "runs",
)


def parse_variant(variant: str) -> Dict[str, Any]:
    """Translate a variant name into dotted configuration overrides.

    :raises ConfigError: On an unknown or malformed token.
    """
    overrides: Dict[str, Any] = {}
    for raw in variant.split("+"):
        token = raw.strip().lower()
        if token in SWITCHES:
            overrides.update(SWITCHES[token])
        elif token.startswith("static"):
            overrides["train.loss_mode"] = LossMode.parse(token).label()
        elif token.startswith("tau:"):
            try:
                overrides["train.tau"] = float(token.partition(":")[2])
            except ValueError:
                raise ConfigError(f"variant {variant!r}: bad temperature in {raw!r}") from None
        else:
            raise ConfigError(f"variant {variant!r}: unknown token {raw!r}")
    return overrides


def variant_config(cfg: RunConfig, variant: str, seed: int) -> RunConfig:
    overrides = parse_variant(variant)
    overrides["seed"] = seed
    return apply_overrides(cfg, overrides)


def run_variant(cfg: RunConfig, variant: str, seed: int) -> Dict[str, Any]:
    """Train and test one variant with one seed.

    Module-level so worker processes can pickle it.
    """
    run_cfg = variant_config(cfg, variant, seed)
    ds = build_dataset(run_cfg)
    model, history = fit_model(run_cfg, ds)
    report = evaluate_model(model, ds.split(Split.TEST), ds.taxonomy, bootstrap=0, split="test")
    return {
        "variant": variant,
        "seed": seed,
        "best_epoch": history.best_epoch,
        "fine_auc": report.fine.macro_auc if report.fine else None,
        "coarse_auc": report.coarse.macro_auc if report.coarse else None,
        "consistency": report.hierarchy_consistency,
    }


def summarize_variant(variant: str, runs: Sequence[Dict[str, Any]]) -> Dict[str, Any]:
    row: Dict[str, Any] = {"variant": variant, "runs": len(runs)}
    for key in ("fine_auc", "coarse_auc", "consistency"):
        mean, std = summarize_runs([r[key] for r in runs])
        row[f"{key}_mean"] = mean
        row[f"{key}_std"] = std
    return row


def write_table_csv(rows: Sequence[Dict[str, Any]], path: Path) -> Path:
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(TABLE_COLUMNS)
        for row in rows:
            writer.writerow(["" if row[c] is None else row[c] for c in TABLE_COLUMNS])
    return path


def cmd_compare(cfg: RunConfig, workers: Optional[int] = None) -> Dict[str, Any]:
    """Run every ``compare.variants`` entry over ``compare.seeds``.

    Writes ``compare.csv`` (one row per variant, mean and std columns),
    ``compare.json`` (the table plus every individual run) and ``run.json``.

    :param workers: Process count; falls back to ``compare.workers`` and then
                    ``HMIL_WORKERS``.
    :raises ConfigError: If a variant is malformed (checked before training).
    """
    variants = list(cfg.compare.variants)
    if not variants:
        raise ConfigError("compare needs at least one variant")
    for variant in variants:
        variant_config(cfg, variant, cfg.compare.seeds[0])

    n_jobs = workers or cfg.compare.workers or get_settings().workers
    jobs = [(v, s) for v in variants for s in cfg.compare.seeds]
    logger.info(f"Comparing {len(variants)} variants x {len(cfg.compare.seeds)} seeds on {n_jobs} worker(s)")
    runs: List[Dict[str, Any]] = Parallel(n_jobs=n_jobs)(
        delayed(run_variant)(cfg, v, s) for v, s in jobs
    )

    table = [summarize_variant(v, [r for r in runs if r["variant"] == v]) for v in variants]
    out = Path(cfg.out)
    write_table_csv(table, out / "compare.csv")
    write_json(out / "compare.json", {"table": table, "runs": runs})
    write_run_record(cfg, "compare")
    logger.info(f"Wrote comparison table to {out / 'compare.csv'}")
    payload = {"table": table}
    print_json(payload)
    return {"table": table, "runs": runs}
