"""``train``: fit a model and save its best checkpoint and history."""

from pathlib import Path
from typing import Any, Dict

from ..config import RunConfig
from .common import (
    CHECKPOINT_NAME,
    HISTORY_NAME,
    build_dataset,
    fit_model,
    model_kind,
    print_json,
    save_model,
    write_run_record,
)


def cmd_train(cfg: RunConfig) -> Dict[str, Any]:
    """Train ``cfg.model`` and write ``checkpoint.hmil``, ``history.jsonl``
    and ``run.json`` under ``cfg.out``."""
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    ds = build_dataset(cfg)
    model, history = fit_model(cfg, ds, log_path=out / HISTORY_NAME)
    checkpoint = save_model(out / CHECKPOINT_NAME, model, ds)
    write_run_record(cfg, "train")

    best = history.records[history.best_epoch]
    summary = {
        "model": model_kind(model),
        "epochs": len(history.records),
        "best_epoch": history.best_epoch,
        "best_validation": best.validation,
        "checkpoint": str(checkpoint),
        "history": str(out / HISTORY_NAME),
    }
    print_json(summary)
    return summary
