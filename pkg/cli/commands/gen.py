"""``gen``: write a synthetic dataset to disk."""

from pathlib import Path
from typing import Any, Dict

import numpy as np

from hmil.data.io import write_dataset
from hmil.data.models import Dataset
from hmil.data.synthetic import generate_synthetic
from shared.errors import ConfigError
from shared.logging import get_logger

from ..config import RunConfig
from .common import print_json, write_run_record


logger = get_logger(__name__)


def dataset_summary(ds: Dataset) -> Dict[str, Any]:
    sizes = np.array([b.n_instances for b in ds.bags])
    return {
        "bags": len(ds),
        "d": ds.d_c,
        "bags_per_fine_class": ds.fine_counts(),
        "instances": {
            "min": int(sizes.min()),
            "max": int(sizes.max()),
            "mean": float(sizes.mean()),
        },
    }


def ensure_output_dir(out: Path, force: bool) -> None:
    """Create ``out``; refuse a non-empty existing directory unless forced.

    A forced run removes the ``bags/*.hmb`` files of an earlier dataset so the
    new manifest is the only one describing the directory. Other files are
    overwritten or left alone.

    :raises FileExistsError: If ``out`` is non-empty and ``force`` is false.
    """
    if out.exists() and not out.is_dir():
        raise FileExistsError(f"output path {out} exists and is not a directory")
    if out.is_dir() and any(out.iterdir()):
        if not force:
            raise FileExistsError(f"output directory {out} is not empty; pass --force to overwrite")
        stale = sorted((out / "bags").glob("*.hmb"))
        for path in stale:
            path.unlink()
        if stale:
            logger.info(f"Removed {len(stale)} bag files from {out / 'bags'}")
    out.mkdir(parents=True, exist_ok=True)


def cmd_gen(cfg: RunConfig, force: bool = False) -> Dict[str, Any]:
    """Generate the configured synthetic dataset into ``cfg.out``.

    Writes ``manifest.json``, ``taxonomy.json``, ``bags/*.hmb`` and
    ``run.json``; returns the dataset summary.
    """
    if cfg.synthetic is None:
        raise ConfigError("gen needs a 'synthetic' section")
    out = Path(cfg.out)
    ensure_output_dir(out, force)
    ds = generate_synthetic(cfg.synthetic)
    manifest = write_dataset(ds, out)
    write_run_record(cfg, "gen")
    summary = dataset_summary(ds)
    summary["manifest"] = str(manifest)
    print_json(summary)
    return summary
