"""Stratified train/validation/test assignment.

Two schemes are supported:

- :class:`RatioSplit` draws stratified train/val/test subsets of the requested
  proportions (7:1:2 by default).
- :class:`KFoldSplit` partitions the bags into ``k`` stratified folds; fold
  ``fold_index`` is the test set, the next fold (cyclically) the validation
  set and the remaining folds the training set.
"""

from collections import Counter
from typing import Dict, List, Literal, Union

import numpy as np
from pydantic import BaseModel, Field, model_validator
from sklearn.model_selection import StratifiedKFold, train_test_split

from shared.errors import ConfigError, SplitError
from shared.logging import get_logger

from .models import Dataset, Split, labels_of


logger = get_logger(__name__)

StratifyOn = Literal["fine", "coarse"]


class RatioSplit(BaseModel):
    """Train/val/test proportions; must sum to 1."""

    kind: Literal["ratio"] = "ratio"
    train: float = Field(default=0.7, gt=0.0, le=1.0)
    val: float = Field(default=0.1, ge=0.0, lt=1.0)
    test: float = Field(default=0.2, ge=0.0, lt=1.0)

    @model_validator(mode="after")
    def ratios_must_sum_to_one(self) -> "RatioSplit":
        total = self.train + self.val + self.test
        if abs(total - 1.0) > 1e-9:
            raise ValueError(f"split ratios must sum to 1, got {total}")
        return self


class KFoldSplit(BaseModel):
    """Fold ``fold_index`` of a ``k``-fold partition."""

    kind: Literal["kfold"] = "kfold"
    k: int = Field(ge=2)
    fold_index: int = Field(default=0, ge=0)

    @model_validator(mode="after")
    def fold_must_exist(self) -> "KFoldSplit":
        if self.fold_index >= self.k:
            raise ValueError(f"fold_index {self.fold_index} outside [0, {self.k})")
        return self

    @classmethod
    def parse(cls, text: str) -> "KFoldSplit":
        """Parse the ``k:i`` command-line form."""
        k_text, sep, i_text = text.partition(":")
        try:
            return cls(k=int(k_text), fold_index=int(i_text) if sep else 0)
        except ValueError as exc:
            raise ConfigError(f"cannot parse fold spec {text!r}; expected k:i ({exc})") from None


SplitScheme = Union[RatioSplit, KFoldSplit]


def _sklearn_seeds(seed: int, count: int) -> List[int]:
    # sklearn takes 32-bit seeds; derive them from the full 64-bit seed.
    return [int(s) for s in np.random.SeedSequence(seed).generate_state(count)]


def _ratio_assignment(labels: np.ndarray, scheme: RatioSplit, seed: int) -> np.ndarray:
    n = len(labels)
    n_test = int(round(scheme.test * n))
    n_val = int(round(scheme.val * n))
    if n - n_test - n_val < 1:
        raise SplitError(f"ratios {scheme.train}/{scheme.val}/{scheme.test} leave no training bags")
    seeds = _sklearn_seeds(seed, 2)
    tags = np.full(n, Split.TRAIN.value, dtype=object)
    indices = np.arange(n)
    try:
        rest = indices
        if n_test > 0:
            rest, test_idx = train_test_split(
                indices, test_size=n_test, stratify=labels, random_state=seeds[0]
            )
            tags[test_idx] = Split.TEST.value
        if n_val > 0:
            _, val_idx = train_test_split(
                rest, test_size=n_val, stratify=labels[rest], random_state=seeds[1]
            )
            tags[val_idx] = Split.VAL.value
    except ValueError as exc:
        raise SplitError(f"stratum too small for ratio split: {exc}") from exc
    return tags


def _kfold_assignment(labels: np.ndarray, scheme: KFoldSplit, seed: int) -> np.ndarray:
    counts = Counter(labels.tolist())
    smallest, size = min(counts.items(), key=lambda kv: (kv[1], kv[0]))
    if size < scheme.k:
        raise SplitError(
            f"stratum too small: class {smallest} has {size} bags, {scheme.k}-fold needs {scheme.k}"
        )
    folder = StratifiedKFold(n_splits=scheme.k, shuffle=True, random_state=_sklearn_seeds(seed, 1)[0])
    fold_of = np.empty(len(labels), dtype=int)
    for fold, (_, test_idx) in enumerate(folder.split(np.zeros(len(labels)), labels)):
        fold_of[test_idx] = fold
    val_fold = (scheme.fold_index + 1) % scheme.k
    tags = np.full(len(labels), Split.TRAIN.value, dtype=object)
    tags[fold_of == scheme.fold_index] = Split.TEST.value
    tags[fold_of == val_fold] = Split.VAL.value
    return tags


def make_splits(
    ds: Dataset,
    scheme: SplitScheme,
    seed: int,
    stratify_on: StratifyOn = "fine",
) -> Dataset:
    """Return a copy of ``ds`` with every bag tagged train, val or test.

    Deterministic given ``seed``; stratified on the fine labels by default.

    :raises SplitError: If a stratum is too small for the scheme.
    """
    labels = np.asarray(labels_of(ds.bags, stratify_on))
    if isinstance(scheme, KFoldSplit):
        tags = _kfold_assignment(labels, scheme, seed)
    else:
        tags = _ratio_assignment(labels, scheme, seed)
    mapping: Dict[str, Split] = {b.bag_id: Split(t) for b, t in zip(ds.bags, tags)}
    out = ds.with_splits(mapping)
    logger.info(f"Split {len(ds)} bags ({scheme.kind}, seed={seed}): {out.split_sizes()}")
    return out
