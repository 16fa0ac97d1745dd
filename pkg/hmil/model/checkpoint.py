"""Versioned binary checkpoint container.

Layout (little-endian)::

  b"HMIL" | u32 version | u32 config_len | config JSON (UTF-8)
  | u32 n_params | n_params x (u32 name_len | name | u32 rows | u32 cols | rows*cols f64)

The JSON config block carries the model ``kind`` (``hmil``, ``mean``, ``max``
or ``abmil``), the model config and the taxonomy names, so evaluation can
check compatibility with a dataset before running.
"""

import json
import struct
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Dict, Mapping, Union

import numpy as np

from shared.errors import FormatError
from shared.logging import get_logger

from ..tensor.engine import Matrix


logger = get_logger(__name__)

MAGIC = b"HMIL"
FORMAT_VERSION = 1

_U32 = struct.Struct("<I")


@dataclass
class Checkpoint:
    """Decoded checkpoint contents.

    :ivar kind: Model kind tag.
    :ivar config: Model config as a JSON-compatible dict.
    :ivar taxonomy: ``{"coarse": [...], "fine": [...], "parent": {...}}``.
    :ivar params: Parameter arrays keyed by name.
    """

    kind: str
    config: Dict[str, Any]
    taxonomy: Dict[str, Any]
    params: Dict[str, Matrix]


def encode_checkpoint(
    kind: str,
    config: Mapping[str, Any],
    taxonomy: Mapping[str, Any],
    params: Mapping[str, Matrix],
) -> bytes:
    header = json.dumps(
        {"kind": kind, "config": dict(config), "taxonomy": dict(taxonomy)},
        sort_keys=True,
        separators=(",", ":"),
    ).encode("utf-8")
    parts = [MAGIC, _U32.pack(FORMAT_VERSION), _U32.pack(len(header)), header]
    parts.append(_U32.pack(len(params)))
    for name in sorted(params):
        arr = np.ascontiguousarray(params[name], dtype="<f8")
        if arr.ndim != 2:
            raise ValueError(f"parameter {name} must be 2-D")
        raw_name = name.encode("utf-8")
        parts += [
            _U32.pack(len(raw_name)),
            raw_name,
            _U32.pack(arr.shape[0]),
            _U32.pack(arr.shape[1]),
            arr.tobytes(order="C"),
        ]
    return b"".join(parts)


class _Reader:
    def __init__(self, data: bytes) -> None:
        self.data = data
        self.pos = 0

    def take(self, n: int, what: str) -> bytes:
        if self.pos + n > len(self.data):
            raise FormatError(
                f"truncated checkpoint while reading {what}: need {n} bytes, "
                f"{len(self.data) - self.pos} left",
                offset=self.pos,
            )
        chunk = self.data[self.pos : self.pos + n]
        self.pos += n
        return chunk

    def u32(self, what: str) -> int:
        return _U32.unpack(self.take(4, what))[0]


def decode_checkpoint(data: bytes) -> Checkpoint:
    """Parse bytes produced by :func:`encode_checkpoint`.

    :raises FormatError: On bad magic, unsupported version, truncation or a
                         malformed config block; the error carries the byte
                         offset.
    """
    r = _Reader(data)
    magic = r.take(4, "magic")
    if magic != MAGIC:
        raise FormatError(f"bad checkpoint magic {magic!r}", offset=0)
    version = r.u32("version")
    if version != FORMAT_VERSION:
        raise FormatError(f"unsupported checkpoint version {version}", offset=4)
    header_len = r.u32("config length")
    header_at = r.pos
    try:
        header = json.loads(r.take(header_len, "config block").decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise FormatError(f"malformed config block: {exc}", offset=header_at) from exc
    count = r.u32("parameter count")
    params: Dict[str, Matrix] = {}
    for _ in range(count):
        name = r.take(r.u32("name length"), "parameter name").decode("utf-8")
        rows, cols = r.u32("rows"), r.u32("cols")
        raw = r.take(rows * cols * 8, f"parameter {name}")
        params[name] = np.frombuffer(raw, dtype="<f8").astype(np.float64).reshape(rows, cols)
    if r.pos != len(data):
        raise FormatError("trailing bytes after last parameter", offset=r.pos)
    return Checkpoint(
        kind=str(header.get("kind", "")),
        config=dict(header.get("config", {})),
        taxonomy=dict(header.get("taxonomy", {})),
        params=params,
    )


def save_checkpoint(
    path: Union[str, Path],
    kind: str,
    config: Mapping[str, Any],
    taxonomy: Mapping[str, Any],
    params: Mapping[str, Matrix],
) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_bytes(encode_checkpoint(kind, config, taxonomy, params))
    logger.info(f"Saved {kind} checkpoint to {path}")
    return path


def load_checkpoint(path: Union[str, Path]) -> Checkpoint:
    return decode_checkpoint(Path(path).read_bytes())
