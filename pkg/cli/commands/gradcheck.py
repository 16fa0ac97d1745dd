"""``gradcheck``: finite-difference check of every loss component.

Builds a small synthetic batch and a fresh dual-branch model, then compares
the analytic gradients of ``ce_c``, ``ce_f``, ``ia``, ``ba``, ``reg`` and the
weighted total against central differences.
"""

from pathlib import Path
from typing import Any, Callable, Dict, List, Mapping, Sequence, Tuple

from hmil.data.io import load_manifest_taxonomy
from hmil.data.models import FeatureBag, SyntheticConfig
from hmil.data.synthetic import generate_synthetic
from hmil.hierarchy import TaxonomySpec, projection_matrix, taxonomy_from_spec
from hmil.losses import COMPONENTS, combine_nodes, loss_weights
from hmil.model.models import HmilConfig
from hmil.model.network import HmilModel, init_model
from hmil.tensor.engine import Matrix, Node, Tape
from hmil.tensor.gradcheck import grad_check
from hmil.training.models import TrainConfig
from hmil.training.trainer import hmil_components
from shared.errors import ConfigError, ThresholdBreach
from shared.logging import get_logger

from ..config import RunConfig
from .common import print_json, train_config, write_json, write_run_record


logger = get_logger(__name__)

COMBINED = "combined"


def _taxonomy_spec(cfg: RunConfig) -> TaxonomySpec:
    if cfg.dataset:
        return load_manifest_taxonomy(cfg.dataset).to_spec()
    if cfg.synthetic is None:
        raise ConfigError("no taxonomy: set 'dataset' or 'synthetic'")
    return cfg.synthetic.taxonomy


def gradcheck_problem(cfg: RunConfig) -> Tuple[HmilModel, List[FeatureBag], Matrix, TrainConfig]:
    """Model, bags, projection and loss settings of the gradient-check problem.

    Every loss term is switched on regardless of the run's ablation switches.
    """
    opts = cfg.gradcheck
    spec = _taxonomy_spec(cfg)
    taxonomy = taxonomy_from_spec(spec)
    ds = generate_synthetic(
        SyntheticConfig(
            taxonomy=spec,
            d_c=opts.d_c,
            bags_per_fine_class=opts.bags_per_fine_class,
            instances_range=(2, opts.max_instances),
            witness_rate=0.5,
            seed=cfg.seed,
        )
    )
    model = init_model(
        HmilConfig(
            d_c=opts.d_c,
            n_coarse=taxonomy.n_coarse,
            n_fine=taxonomy.n_fine,
            use_ofr=cfg.model_options.use_ofr,
            seed=cfg.seed,
        )
    )
    tcfg = train_config(cfg).model_copy(
        update={"ham": True, "hba": True, "scl": True, "coarse_branch": True}
    )
    return model, list(ds.bags), projection_matrix(taxonomy), tcfg


def loss_builders(
    model: HmilModel, bags: Sequence[FeatureBag], P: Matrix, tcfg: TrainConfig, epoch: int, epochs: int
) -> Dict[str, Callable[[Mapping[str, Matrix]], Node]]:
    weights, _ = loss_weights(tcfg.loss_mode, epoch, epochs)

    def components(params: Mapping[str, Matrix]) -> Dict[str, Node]:
        perturbed = HmilModel(config=model.config, params=dict(params))
        return hmil_components(perturbed, Tape(), bags, P, tcfg)

    def single(name: str) -> Callable[[Mapping[str, Matrix]], Node]:
        return lambda params: components(params)[name]

    builders = {name: single(name) for name in COMPONENTS}
    builders[COMBINED] = lambda params: combine_nodes(components(params), weights)
    return builders


def cmd_gradcheck(cfg: RunConfig) -> List[Dict[str, Any]]:
    """Report the max relative error per component (six rows).

    :raises ThresholdBreach: Naming every component above the threshold,
                             after the report has been written.
    """
    opts = cfg.gradcheck
    model, bags, P, tcfg = gradcheck_problem(cfg)
    rows: List[Dict[str, Any]] = []
    for name, build in loss_builders(model, bags, P, tcfg, opts.epoch, opts.epochs).items():
        err = grad_check(build, model.params, epsilon=opts.epsilon)
        ok = err <= opts.threshold
        rows.append({"component": name, "max_rel_error": err, "ok": ok})
        logger.info(f"gradcheck {name}: max relative error {err:.3e} ({'ok' if ok else 'FAIL'})")

    write_json(Path(cfg.out) / "gradcheck.json", rows)
    write_run_record(cfg, "gradcheck")
    print_json(rows)
    failed = [r["component"] for r in rows if not r["ok"]]
    if failed:
        raise ThresholdBreach(
            f"gradient check failed for {', '.join(failed)} (threshold {opts.threshold:g})"
        )
    return rows
