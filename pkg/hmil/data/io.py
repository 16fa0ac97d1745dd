"""Bag feature files, CSV import and dataset manifests.

Bag file layout (little-endian)::

  b"HMB1" | u32 N | u32 d | N*d float32, row-major

Manifest::

  {"taxonomy": "<path>", "d": <int>,
   "bags": [{"id": str, "file": str, "fine": str, "coarse": str, "split": str?}, ...]}

Paths inside a manifest are resolved relative to the manifest's directory.
"""

import json
import re
import struct
from pathlib import Path
from typing import List, Optional, Union

import numpy as np
from pydantic import BaseModel, Field, ValidationError

from shared.errors import DatasetError, FormatError, NumericError
from shared.logging import get_logger

from ..hierarchy import Taxonomy, load_taxonomy, save_taxonomy
from ..tensor.engine import Matrix
from .models import Dataset, FeatureBag, Split


logger = get_logger(__name__)

BAG_MAGIC = b"HMB1"
HEADER_SIZE = 12
MAX_ELEMENTS = 2**31 - 1

_HEADER = struct.Struct("<4sII")
_F32_MAX = float(np.finfo(np.float32).max)

PathLike = Union[str, Path]


def encode_bag(features: Matrix) -> bytes:
    arr = np.asarray(features, dtype=np.float64)
    if arr.ndim != 2:
        raise FormatError(f"bag features must be 2-D, got shape {arr.shape}")
    n, d = arr.shape
    if n < 1 or d < 1:
        raise FormatError(f"bag features must be non-empty, got shape {arr.shape}")
    if n * d > MAX_ELEMENTS:
        raise FormatError(f"dimension overflow: {n} x {d} exceeds {MAX_ELEMENTS} elements")
    if not np.all(np.isfinite(arr)) or np.any(np.abs(arr) > _F32_MAX):
        raise NumericError("bag features must be finite at 32-bit precision")
    body = np.ascontiguousarray(arr, dtype="<f4").tobytes(order="C")
    return _HEADER.pack(BAG_MAGIC, n, d) + body


def decode_bag(data: bytes, source: str = "bag") -> Matrix:
    """Parse bytes produced by :func:`encode_bag` into a float64 matrix.

    :raises FormatError: On bad magic, zero or overflowing dimensions,
                         truncation or trailing bytes, with the byte offset.
    """
    if len(data) < HEADER_SIZE:
        raise FormatError(
            f"{source}: truncated bag header: {len(data)} of {HEADER_SIZE} bytes", offset=len(data)
        )
    magic, n, d = _HEADER.unpack_from(data, 0)
    if magic != BAG_MAGIC:
        raise FormatError(f"{source}: bad bag magic {magic!r}", offset=0)
    if n < 1:
        raise FormatError(f"{source}: bag declares zero instances", offset=4)
    if d < 1:
        raise FormatError(f"{source}: bag declares zero feature width", offset=8)
    if n * d > MAX_ELEMENTS:
        raise FormatError(
            f"{source}: dimension overflow: {n} x {d} exceeds {MAX_ELEMENTS} elements", offset=4
        )
    expected = HEADER_SIZE + n * d * 4
    if len(data) < expected:
        raise FormatError(
            f"{source}: truncated bag, header declares {n} x {d} floats, "
            f"{len(data) - HEADER_SIZE} data bytes present",
            offset=len(data),
        )
    if len(data) > expected:
        raise FormatError(f"{source}: trailing bytes after bag data", offset=expected)
    values = np.frombuffer(data, dtype="<f4", count=n * d, offset=HEADER_SIZE)
    out = values.astype(np.float64).reshape(n, d)
    out.flags.writeable = False
    return out


def write_bag_file(path: PathLike, features: Matrix) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_bytes(encode_bag(features))
    return path


def read_bag_file(path: PathLike) -> Matrix:
    return decode_bag(Path(path).read_bytes(), source=str(path))


def read_bag_csv(path: PathLike) -> Matrix:
    """Read one bag from CSV: a header of ``d`` column names, one row per instance.

    :raises FormatError: If the file has no instance rows, a ragged row or a
                         non-numeric cell.
    """
    path = Path(path)
    with path.open("r", encoding="utf-8") as fh:
        header = fh.readline()
    width = len([c for c in header.strip().split(",") if c.strip()]) if header.strip() else 0
    if width == 0:
        raise FormatError(f"{path}: missing header row")
    try:
        values = np.loadtxt(path, delimiter=",", skiprows=1, dtype=np.float64, ndmin=2)
    except ValueError as exc:
        raise FormatError(f"{path}: {exc}") from exc
    if values.size == 0:
        raise FormatError(f"{path}: no instance rows")
    if values.shape[1] != width:
        raise FormatError(f"{path}: header names {width} columns, rows have {values.shape[1]}")
    values.flags.writeable = False
    return values


class ManifestBag(BaseModel):
    id: str = Field(min_length=1)
    file: str
    fine: str
    coarse: str
    split: Optional[Split] = None


class Manifest(BaseModel):
    """Dataset manifest document."""

    taxonomy: str
    d: int = Field(ge=1)
    bags: List[ManifestBag]


def _read_manifest(manifest_path: Path) -> Manifest:
    try:
        return Manifest.model_validate_json(manifest_path.read_text(encoding="utf-8"))
    except ValidationError as exc:
        raise FormatError(f"invalid manifest {manifest_path}: {exc}") from exc


def load_manifest_taxonomy(manifest_path: PathLike) -> Taxonomy:
    """Taxonomy referenced by a manifest; bag files are not read.

    :raises FileNotFoundError: If the manifest or its taxonomy file is missing.
    :raises FormatError: On a malformed manifest.
    """
    manifest_path = Path(manifest_path)
    return load_taxonomy(manifest_path.parent / _read_manifest(manifest_path).taxonomy)


def load_dataset(manifest_path: PathLike) -> Dataset:
    """Load and validate the dataset described by a manifest.

    The coarse label of each entry is recomputed from the taxonomy and must
    match the stated one.

    :raises FileNotFoundError: If the manifest or a referenced file is missing.
    :raises DatasetError: On an empty bag list, a parent mismatch or a width
                          mismatch.
    :raises TaxonomyError: On an unknown class name.
    :raises FormatError: On a malformed manifest or feature file.
    """
    manifest_path = Path(manifest_path)
    manifest = _read_manifest(manifest_path)
    if not manifest.bags:
        raise DatasetError("dataset empty")

    root = manifest_path.parent
    taxonomy = load_taxonomy(root / manifest.taxonomy)
    bags: List[FeatureBag] = []
    for entry in manifest.bags:
        y_f = taxonomy.fine_index(entry.fine)
        y_c = taxonomy.coarse_index(entry.coarse)
        if taxonomy.coarse_of(y_f) != y_c:
            expected = taxonomy.coarse_names[taxonomy.coarse_of(y_f)]
            raise DatasetError(
                f"bag {entry.id!r}: coarse label {entry.coarse!r} is not the parent of "
                f"{entry.fine!r} (expected {expected!r})"
            )
        file_path = root / entry.file
        if file_path.suffix.lower() == ".csv":
            features = read_bag_csv(file_path)
        else:
            features = read_bag_file(file_path)
        bags.append(
            FeatureBag(
                bag_id=entry.id,
                features=features,
                y_f=y_f,
                y_c=y_c,
                split=entry.split or Split.UNASSIGNED,
            )
        )

    ds = Dataset(taxonomy=taxonomy, bags=tuple(bags), d_c=manifest.d)
    logger.info(f"Loaded {len(ds)} bags from {manifest_path}: {ds.split_sizes()}")
    return ds


def _file_stem(index: int, bag_id: str) -> str:
    return f"{index:05d}_{re.sub(r'[^A-Za-z0-9._-]', '_', bag_id)}"


def write_dataset(ds: Dataset, out_dir: PathLike) -> Path:
    """Write ``taxonomy.json``, ``bags/*.hmb`` and ``manifest.json``.

    :returns: Path of the manifest.
    """
    out_dir = Path(out_dir)
    (out_dir / "bags").mkdir(parents=True, exist_ok=True)
    save_taxonomy(out_dir / "taxonomy.json", ds.taxonomy)

    entries = []
    for i, bag in enumerate(ds.bags):
        rel = f"bags/{_file_stem(i, bag.bag_id)}.hmb"
        write_bag_file(out_dir / rel, bag.features)
        entries.append(
            {
                "id": bag.bag_id,
                "file": rel,
                "fine": ds.taxonomy.fine_names[bag.y_f],
                "coarse": ds.taxonomy.coarse_names[bag.y_c],
                "split": bag.split.value,
            }
        )
    manifest_path = out_dir / "manifest.json"
    payload = {"taxonomy": "taxonomy.json", "d": ds.d_c, "bags": entries}
    manifest_path.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    logger.info(f"Wrote {len(ds)} bags to {out_dir}")
    return manifest_path
