"""Test configuration.

Ensures the project root is importable so that the `hmil`, `cli` and `shared`
packages can be imported when running tests via `uv run pytest` where CWD may
not be on `sys.path` by default. The file log sink is disabled for the session.
"""

from pathlib import Path
import os
import sys

import pytest


def _ensure_project_root_on_path() -> None:
    project_root = Path(__file__).resolve().parent.parent
    if str(project_root) not in sys.path:
        sys.path.insert(0, str(project_root))


_ensure_project_root_on_path()
os.environ["HMIL_LOG_DIR"] = ""

from hmil.data.models import Dataset, SyntheticConfig  # noqa: E402
from hmil.data.synthetic import generate_synthetic  # noqa: E402
from hmil.hierarchy import Taxonomy, TaxonomySpec, build_taxonomy, taxonomy_from_spec  # noqa: E402


BREAST_SPEC = TaxonomySpec(
    coarse=["benign", "malignant"],
    fine=["normal", "benign_lesion", "in_situ", "invasive"],
    parent={
        "normal": "benign",
        "benign_lesion": "benign",
        "in_situ": "malignant",
        "invasive": "malignant",
    },
)


@pytest.fixture()
def taxonomy() -> Taxonomy:
    """K_c=2, K_f=4 taxonomy used throughout the tests."""
    return taxonomy_from_spec(BREAST_SPEC)


@pytest.fixture()
def uneven_taxonomy() -> Taxonomy:
    """Coarse classes with one and two children."""
    return build_taxonomy(["low", "high"], ["a", "b", "c"], [("a", "low"), ("b", "high"), ("c", "high")])


def tiny_synthetic_config(**overrides) -> SyntheticConfig:
    values = dict(
        taxonomy=BREAST_SPEC,
        d_c=8,
        bags_per_fine_class=10,
        instances_range=(3, 6),
        witness_rate=0.5,
        seed=3,
    )
    values.update(overrides)
    return SyntheticConfig(**values)


@pytest.fixture()
def tiny_dataset() -> Dataset:
    """40 small bags, 10 per fine class, 8 features each."""
    return generate_synthetic(tiny_synthetic_config())


@pytest.fixture()
def make_synthetic():
    """Factory for small synthetic configurations with field overrides."""
    return tiny_synthetic_config
