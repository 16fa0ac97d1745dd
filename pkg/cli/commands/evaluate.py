"""``eval``: score a checkpoint on one split of its dataset."""

from pathlib import Path
from typing import Any, Dict, Optional, Union

from hmil.data.models import Split
from hmil.evaluation.report import evaluate_model, write_per_class_csv, write_report_json

from ..config import RunConfig
from .common import CHECKPOINT_NAME, build_dataset, print_json, restore_model, write_run_record


def cmd_eval(cfg: RunConfig, checkpoint: Optional[Union[str, Path]] = None) -> Dict[str, Any]:
    """Evaluate a checkpoint (default ``<out>/checkpoint.hmil``).

    Writes ``report.json``, ``report.csv`` (per-class rows) and ``run.json``.
    Bootstrap intervals are included when ``eval.bootstrap > 0``.
    """
    out = Path(cfg.out)
    ckpt_path = Path(checkpoint) if checkpoint is not None else out / CHECKPOINT_NAME
    ds = build_dataset(cfg)
    model = restore_model(ckpt_path, ds)
    bags = ds.split(Split(cfg.eval.split))
    report = evaluate_model(
        model,
        bags,
        ds.taxonomy,
        bootstrap=cfg.eval.bootstrap,
        seed=cfg.seed,
        split=cfg.eval.split,
    )
    write_report_json(report, out / "report.json")
    write_per_class_csv(report, out / "report.csv")
    write_run_record(cfg, "eval")
    payload = report.model_dump(mode="json")
    print_json(payload)
    return payload
