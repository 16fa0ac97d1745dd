"""Two-level label taxonomy and the fine-to-coarse projection.

The projection is stored as ``P`` in ``{0, 1}^{K_c x K_f}`` with
``P[c, f] = 1`` iff ``parent(f) == c``, so ``P @ v`` sums fine-class rows into
their coarse parent.

Example::

    t = build_taxonomy(["low", "high"], ["a", "b", "c"], [("a", "low"), ("b", "high"), ("c", "high")])
    P = projection_matrix(t)   # [[1, 0, 0], [0, 1, 1]]
"""

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Dict, List, Sequence, Tuple, Union

import numpy as np
from pydantic import BaseModel, Field, field_validator

from shared.errors import ShapeError, TaxonomyError

from .tensor.engine import Matrix


class TaxonomySpec(BaseModel):
    """JSON document describing a taxonomy.

    Schema: ``{"coarse": [...], "fine": [...], "parent": {"<fine>": "<coarse>"}}``.
    """

    coarse: List[str] = Field(min_length=1)
    fine: List[str] = Field(min_length=1)
    parent: Dict[str, str]

    @field_validator("coarse", "fine")
    @classmethod
    def names_must_be_unique(cls, value: List[str]) -> List[str]:
        if len(set(value)) != len(value):
            raise ValueError("class names must be unique")
        return value


@dataclass(frozen=True)
class Taxonomy:
    """Validated fine-to-coarse mapping.

    :ivar coarse_names: ``K_c`` coarse class names.
    :ivar fine_names: ``K_f`` fine class names.
    :ivar parent: Coarse index of each fine class.
    """

    coarse_names: Tuple[str, ...]
    fine_names: Tuple[str, ...]
    parent: Tuple[int, ...]

    @property
    def n_coarse(self) -> int:
        return len(self.coarse_names)

    @property
    def n_fine(self) -> int:
        return len(self.fine_names)

    def coarse_of(self, fine_index: int) -> int:
        return self.parent[fine_index]

    def children(self, coarse_index: int) -> List[int]:
        return [f for f, c in enumerate(self.parent) if c == coarse_index]

    def fine_index(self, name: str) -> int:
        try:
            return self.fine_names.index(name)
        except ValueError:
            raise TaxonomyError(f"unknown fine class {name!r}") from None

    def coarse_index(self, name: str) -> int:
        try:
            return self.coarse_names.index(name)
        except ValueError:
            raise TaxonomyError(f"unknown coarse class {name!r}") from None

    def to_spec(self) -> TaxonomySpec:
        return TaxonomySpec(
            coarse=list(self.coarse_names),
            fine=list(self.fine_names),
            parent={f: self.coarse_names[c] for f, c in zip(self.fine_names, self.parent)},
        )


def build_taxonomy(
    coarse_names: Sequence[str],
    fine_names: Sequence[str],
    parent_pairs: Sequence[Tuple[str, str]],
) -> Taxonomy:
    """Validate names and ``(fine, coarse)`` parent pairs into a :class:`Taxonomy`.

    :raises TaxonomyError: On duplicate names, unknown names, a fine class
                           without a parent or with two parent pairs, or a
                           coarse class without children. The message names
                           the offending class.
    """
    coarse = list(coarse_names)
    fine = list(fine_names)
    if not coarse or not fine:
        raise TaxonomyError("taxonomy needs at least one coarse and one fine class")
    for label, names in (("coarse", coarse), ("fine", fine)):
        seen = set()
        for name in names:
            if name in seen:
                raise TaxonomyError(f"duplicate {label} class {name!r}")
            seen.add(name)

    assigned: Dict[str, str] = {}
    for fine_name, coarse_name in parent_pairs:
        if fine_name not in fine:
            raise TaxonomyError(f"parent pair names unknown fine class {fine_name!r}")
        if coarse_name not in coarse:
            raise TaxonomyError(
                f"fine class {fine_name!r} maps to unknown coarse class {coarse_name!r}"
            )
        if fine_name in assigned:
            raise TaxonomyError(f"fine class {fine_name!r} has more than one parent")
        assigned[fine_name] = coarse_name

    for fine_name in fine:
        if fine_name not in assigned:
            raise TaxonomyError(f"fine class {fine_name!r} has no parent")

    parent = tuple(coarse.index(assigned[f]) for f in fine)
    for c, coarse_name in enumerate(coarse):
        if c not in parent:
            raise TaxonomyError(f"coarse class {coarse_name!r} has no children")

    return Taxonomy(coarse_names=tuple(coarse), fine_names=tuple(fine), parent=parent)


def taxonomy_from_spec(spec: TaxonomySpec) -> Taxonomy:
    return build_taxonomy(spec.coarse, spec.fine, list(spec.parent.items()))


def projection_matrix(t: Taxonomy) -> Matrix:
    """Return the read-only ``K_c x K_f`` 0/1 projection of ``t``."""
    P = np.zeros((t.n_coarse, t.n_fine), dtype=np.float64)
    P[list(t.parent), np.arange(t.n_fine)] = 1.0
    P.flags.writeable = False
    return P


def taxonomy_from_projection(
    P: Matrix, coarse_names: Sequence[str], fine_names: Sequence[str]
) -> Taxonomy:
    """Read the parent lookup back from a projection matrix."""
    P = np.asarray(P)
    if P.shape != (len(coarse_names), len(fine_names)):
        raise ShapeError(
            f"projection {P.shape} does not match {len(coarse_names)}x{len(fine_names)} names"
        )
    if not np.all((P == 0.0) | (P == 1.0)) or not np.all(P.sum(axis=0) == 1.0):
        raise TaxonomyError("projection must be 0/1 with exactly one 1 per column")
    pairs = [(fine_names[f], coarse_names[int(np.argmax(P[:, f]))]) for f in range(P.shape[1])]
    return build_taxonomy(coarse_names, fine_names, pairs)


def project_fine_to_coarse(P: Matrix, v: Matrix) -> Matrix:
    """Sum the fine rows of ``v`` (``K_f x n``) into their coarse parents.

    :raises ShapeError: If ``v`` does not have ``K_f`` rows.
    """
    v = np.asarray(v, dtype=np.float64)
    if v.ndim != 2 or v.shape[0] != P.shape[1]:
        raise ShapeError(f"cannot project {v.shape} with a {P.shape} projection")
    return P @ v


_PRESETS: Dict[str, TaxonomySpec] = {
    "panda": TaxonomySpec(
        coarse=["low", "intermediate", "high"],
        fine=["normal", "ISUP1", "ISUP2", "ISUP3", "ISUP4", "ISUP5"],
        parent={
            "normal": "low",
            "ISUP1": "low",
            "ISUP2": "intermediate",
            "ISUP3": "intermediate",
            "ISUP4": "high",
            "ISUP5": "high",
        },
    ),
    "bracs": TaxonomySpec(
        coarse=["BT", "AT", "MT"],
        fine=["N", "PB", "UDH", "FEA", "ADH", "DCIS", "IC"],
        parent={
            "N": "BT",
            "PB": "BT",
            "UDH": "BT",
            "FEA": "AT",
            "ADH": "AT",
            "DCIS": "MT",
            "IC": "MT",
        },
    ),
}


def preset_taxonomy(name: str) -> Taxonomy:
    """Built-in taxonomies: ``panda`` (ISUP risk groups) and ``bracs``."""
    try:
        return taxonomy_from_spec(_PRESETS[name.lower()])
    except KeyError:
        raise TaxonomyError(
            f"unknown taxonomy preset {name!r}; choose from {sorted(_PRESETS)}"
        ) from None


def load_taxonomy(path: Union[str, Path]) -> Taxonomy:
    """Load a taxonomy JSON document.

    :raises FileNotFoundError: If ``path`` does not exist.
    :raises TaxonomyError: If the document is malformed or invalid.
    """
    raw = Path(path).read_text(encoding="utf-8")
    try:
        spec = TaxonomySpec.model_validate_json(raw)
    except ValueError as exc:
        raise TaxonomyError(f"invalid taxonomy document {path}: {exc}") from exc
    return taxonomy_from_spec(spec)


def save_taxonomy(path: Union[str, Path], t: Taxonomy) -> None:
    payload = t.to_spec().model_dump()
    Path(path).write_text(json.dumps(payload, indent=2) + "\n", encoding="utf-8")
