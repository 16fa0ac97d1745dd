"""Synthetic hierarchical bags built from a witness/background mixture.

Each coarse class gets a center, each fine class a center offset from its
parent's. A bag of fine class ``f`` holds ``ceil(witness_rate * N)`` witness
instances around the fine center and background instances around the origin.
The first child of the first coarse class is the background class: its bags
contain background instances only.
"""

import math

import numpy as np

from shared.logging import get_logger

from ..hierarchy import taxonomy_from_spec
from ..tensor.engine import Matrix
from .models import Dataset, FeatureBag, SyntheticConfig


logger = get_logger(__name__)


def _unit(v: Matrix) -> Matrix:
    norm = float(np.linalg.norm(v))
    return v / norm if norm > 0 else v


def class_centers(cfg: SyntheticConfig, rng: np.random.Generator) -> tuple[Matrix, Matrix]:
    """Coarse centers (``K_c x d``) at pairwise distance ``class_sep_coarse``
    and fine centers (``K_f x d``) at distance ``class_sep_fine`` from their
    parent's center."""
    taxonomy = taxonomy_from_spec(cfg.taxonomy)
    k_c, d = taxonomy.n_coarse, cfg.d_c
    radius = cfg.class_sep_coarse / math.sqrt(2.0)
    if d >= k_c:
        q, _ = np.linalg.qr(rng.standard_normal((d, k_c)))
        coarse = q.T * radius
    else:
        coarse = np.vstack([_unit(rng.standard_normal(d)) for _ in range(k_c)]) * radius
    fine = np.vstack(
        [
            coarse[taxonomy.coarse_of(f)] + cfg.class_sep_fine * _unit(rng.standard_normal(d))
            for f in range(taxonomy.n_fine)
        ]
    )
    return coarse, fine


def witness_count(witness_rate: float, n_instances: int) -> int:
    # Rounded first so 0.1 * 30 counts as 3, not 4.
    return min(n_instances, int(math.ceil(round(witness_rate * n_instances, 9))))


def generate_synthetic(cfg: SyntheticConfig) -> Dataset:
    """Generate a dataset; a pure function of ``cfg``.

    Features are quantized to 32-bit precision so a write/read round trip of
    the bag files reproduces them exactly.
    """
    cfg = SyntheticConfig.model_validate(cfg)
    taxonomy = taxonomy_from_spec(cfg.taxonomy)
    rng = np.random.default_rng(cfg.seed)
    _, fine_centers = class_centers(cfg, rng)
    background = taxonomy.children(0)[0]
    lo, hi = cfg.instances_range

    bags = []
    for f in range(taxonomy.n_fine):
        for j in range(cfg.bags_per_fine_class):
            n = int(rng.integers(lo, hi + 1))
            features = rng.standard_normal((n, cfg.d_c)) * cfg.noise_sigma
            if f != background:
                k = witness_count(cfg.witness_rate, n)
                witnesses = rng.permutation(n)[:k]
                features[witnesses] += fine_centers[f]
            features = features.astype(np.float32).astype(np.float64)
            features.flags.writeable = False
            bags.append(
                FeatureBag(
                    bag_id=f"b{f:02d}_{j:05d}",
                    features=features,
                    y_f=f,
                    y_c=taxonomy.coarse_of(f),
                )
            )

    ds = Dataset(taxonomy=taxonomy, bags=tuple(bags), d_c=cfg.d_c)
    logger.info(
        f"Generated {len(ds)} synthetic bags: K_c={taxonomy.n_coarse}, "
        f"K_f={taxonomy.n_fine}, d={cfg.d_c}, witness_rate={cfg.witness_rate}"
    )
    return ds
