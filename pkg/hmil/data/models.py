"""Bag and dataset types plus the synthetic generator's configuration."""

from collections import Counter
from dataclasses import dataclass, field, replace
from enum import Enum
from typing import Dict, List, Mapping, Sequence, Tuple

from pydantic import BaseModel, Field, field_validator, model_validator

from shared.errors import DatasetError

from ..hierarchy import Taxonomy, TaxonomySpec, taxonomy_from_spec
from ..tensor.engine import Matrix


class Split(str, Enum):
    """Split tag of a bag."""

    TRAIN = "train"
    VAL = "val"
    TEST = "test"
    UNASSIGNED = "unassigned"


@dataclass(frozen=True)
class FeatureBag:
    """One bag of instance features with its two labels.

    :ivar bag_id: Unique identifier within a dataset.
    :ivar features: ``N x d`` instance features (float64).
    :ivar y_f: Fine class index.
    :ivar y_c: Coarse class index, always ``parent(y_f)``.
    :ivar split: Split tag.
    """

    bag_id: str
    features: Matrix = field(repr=False)
    y_f: int
    y_c: int
    split: Split = Split.UNASSIGNED

    @property
    def n_instances(self) -> int:
        return int(self.features.shape[0])


@dataclass(frozen=True)
class Dataset:
    """Validated collection of bags sharing one taxonomy and feature width."""

    taxonomy: Taxonomy
    bags: Tuple[FeatureBag, ...]
    d_c: int

    def __post_init__(self) -> None:
        if not self.bags:
            raise DatasetError("dataset empty")
        seen = set()
        for bag in self.bags:
            if bag.bag_id in seen:
                raise DatasetError(f"duplicate bag id {bag.bag_id!r}")
            seen.add(bag.bag_id)
            if bag.features.ndim != 2 or bag.features.shape[0] < 1:
                raise DatasetError(f"bag {bag.bag_id!r} has no instances")
            if bag.features.shape[1] != self.d_c:
                raise DatasetError(
                    f"bag {bag.bag_id!r} has width {bag.features.shape[1]}, expected {self.d_c}"
                )
            if not 0 <= bag.y_f < self.taxonomy.n_fine:
                raise DatasetError(f"bag {bag.bag_id!r} has invalid fine label {bag.y_f}")
            if bag.y_c != self.taxonomy.coarse_of(bag.y_f):
                raise DatasetError(
                    f"bag {bag.bag_id!r}: coarse label {bag.y_c} is not the parent of "
                    f"fine label {bag.y_f}"
                )

    def __len__(self) -> int:
        return len(self.bags)

    def split(self, tag: Split) -> List[FeatureBag]:
        return [b for b in self.bags if b.split == tag]

    def with_splits(self, tags: Mapping[str, Split]) -> "Dataset":
        """Return a copy with split tags replaced by ``tags[bag_id]``."""
        bags = tuple(replace(b, split=tags.get(b.bag_id, b.split)) for b in self.bags)
        return Dataset(taxonomy=self.taxonomy, bags=bags, d_c=self.d_c)

    def split_sizes(self) -> Dict[str, int]:
        counts = Counter(b.split.value for b in self.bags)
        return {s.value: counts.get(s.value, 0) for s in Split}

    def fine_counts(self) -> Dict[str, int]:
        counts = Counter(b.y_f for b in self.bags)
        return {name: counts.get(i, 0) for i, name in enumerate(self.taxonomy.fine_names)}


def labels_of(bags: Sequence[FeatureBag], level: str = "fine") -> List[int]:
    return [b.y_f if level == "fine" else b.y_c for b in bags]


class SyntheticConfig(BaseModel):
    """Parameters of the witness/background bag generator.

    Parameters
    ----------
    taxonomy:
        Label taxonomy (JSON document form).
    d_c:
        Instance feature width.
    bags_per_fine_class:
        Number of bags generated for every fine class.
    instances_range:
        Inclusive ``[min, max]`` instance count per bag.
    witness_rate:
        Fraction of a positive bag's instances drawn around its fine center.
    class_sep_coarse:
        Pairwise distance between coarse centers.
    class_sep_fine:
        Distance of each fine center from its coarse center.
    noise_sigma:
        Isotropic standard deviation of every instance.
    seed:
        Generator seed (unsigned 64-bit).
    """

    taxonomy: TaxonomySpec
    d_c: int = Field(default=32, ge=1)
    bags_per_fine_class: int = Field(default=100, ge=1)
    instances_range: Tuple[int, int] = (30, 60)
    witness_rate: float = Field(default=0.1, gt=0.0, le=1.0)
    class_sep_coarse: float = Field(default=6.0, gt=0.0)
    class_sep_fine: float = Field(default=1.5, gt=0.0)
    noise_sigma: float = Field(default=1.0, ge=0.0)
    seed: int = Field(default=0, ge=0, lt=2**64)

    @field_validator("instances_range")
    @classmethod
    def range_must_be_ordered(cls, value: Tuple[int, int]) -> Tuple[int, int]:
        lo, hi = value
        if lo < 1:
            raise ValueError("instances_range minimum must be >= 1")
        if hi < lo:
            raise ValueError("instances_range maximum must be >= minimum")
        return value

    @model_validator(mode="after")
    def taxonomy_must_be_valid(self) -> "SyntheticConfig":
        taxonomy_from_spec(self.taxonomy)
        return self
