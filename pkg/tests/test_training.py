import json
from pathlib import Path

import numpy as np
import pytest

from hmil.data import Dataset, RatioSplit, make_splits
from hmil.hierarchy import projection_matrix
from hmil.losses import COMPONENTS
from hmil.model import HmilConfig, HmilModel, init_model
from hmil.tensor import Tape, ops
from hmil.training import TrainConfig, adam_step, fit, hmil_components, init_adam_state, train
from hmil.training.trainer import hmil_scores
from shared.errors import CompatibilityError, DatasetError, NumericError, ShapeError


def _model(ds: Dataset, seed: int = 0) -> HmilModel:
    t = ds.taxonomy
    return init_model(HmilConfig(d_c=ds.d_c, n_coarse=t.n_coarse, n_fine=t.n_fine, seed=seed))


@pytest.fixture()
def split_dataset(tiny_dataset: Dataset) -> Dataset:
    return make_splits(tiny_dataset, RatioSplit(), seed=0)


def _cfg(**overrides) -> TrainConfig:
    values = dict(epochs=3, batch_size=8, learning_rate=1e-2, seed=4)
    values.update(overrides)
    return TrainConfig(**values)


def test_adam_first_step_moves_by_learning_rate() -> None:
    params = {"w": np.array([[1.0, -1.0]])}
    grads = {"w": np.array([[2.0, -0.5]])}
    new, state = adam_step(params, grads, init_adam_state(params), lr=0.1)
    np.testing.assert_allclose(new["w"], [[0.9, -0.9]], atol=1e-7)
    assert state.step == 1
    np.testing.assert_array_equal(params["w"], [[1.0, -1.0]])


def test_adam_weight_decay_modes_differ() -> None:
    params = {"w": np.array([[2.0]])}
    grads = {"w": np.array([[0.1]])}
    coupled, _ = adam_step(params, grads, init_adam_state(params), lr=0.1, wd=0.5)
    decoupled, _ = adam_step(params, grads, init_adam_state(params), lr=0.1, wd=0.5, decoupled=True)
    np.testing.assert_allclose(coupled["w"], [[1.9]], atol=1e-7)
    np.testing.assert_allclose(decoupled["w"], [[2.0 - 0.1 - 0.1]], atol=1e-7)


def test_adam_missing_gradient_counts_as_zero() -> None:
    params = {"w": np.array([[1.0]]), "frozen": np.array([[3.0]])}
    new, state = adam_step(params, {"w": np.array([[1.0]])}, init_adam_state(params), lr=0.1)
    assert new["frozen"][0, 0] == 3.0
    assert state.m["frozen"][0, 0] == 0.0


def test_adam_shape_mismatch() -> None:
    params = {"w": np.ones((2, 2))}
    with pytest.raises(ShapeError):
        adam_step(params, {"w": np.ones((1, 2))}, init_adam_state(params), lr=0.1)


def test_components_respect_switches(split_dataset: Dataset) -> None:
    model = _model(split_dataset)
    P = projection_matrix(split_dataset.taxonomy)
    bags = list(split_dataset.bags[:6])
    full = hmil_components(model, Tape(), bags, P, _cfg())
    assert set(full) == set(COMPONENTS)
    no_align = hmil_components(model, Tape(), bags, P, _cfg(ham=False, hba=False, scl=False))
    assert set(no_align) == {"ce_c", "ce_f"}
    fine_only = hmil_components(model, Tape(), bags, P, _cfg(coarse_branch=False))
    assert set(fine_only) == {"ce_f", "reg"}
    both = hmil_components(model, Tape(), bags, P, _cfg(scl_coarse=True))
    assert both["reg"].item() >= full["reg"].item()


def test_train_history_and_beta_column(tmp_path: Path, split_dataset: Dataset) -> None:
    log = tmp_path / "history.jsonl"
    model, history = train(_model(split_dataset), split_dataset, split_dataset.taxonomy, _cfg(), log_path=log)
    assert isinstance(model, HmilModel)
    assert [r.epoch for r in history.records] == [0, 1, 2]
    assert [r.beta for r in history.records] == [1.0, 2 / 3, 1 / 3]
    lines = log.read_text(encoding="utf-8").splitlines()
    assert len(lines) == 3
    first = json.loads(lines[0])
    assert first["beta"] == 1.0
    for key in (*COMPONENTS, "loss", "val_fine_macro_auc", "val_coarse_macro_auc", "val_consistency"):
        assert key in first
    assert list(first) == sorted(first)
    assert log.read_text(encoding="utf-8") == history.to_jsonl()
    assert 0 <= history.best_epoch < 3


def test_training_is_deterministic(tmp_path: Path, split_dataset: Dataset) -> None:
    runs = []
    for name in ("a", "b"):
        log = tmp_path / f"{name}.jsonl"
        model, _ = train(_model(split_dataset), split_dataset, split_dataset.taxonomy, _cfg(), log_path=log)
        runs.append((log.read_bytes(), model))
    assert runs[0][0] == runs[1][0]
    for name, value in runs[0][1].params.items():
        assert np.array_equal(value, runs[1][1].params[name])


def test_static_mode_omits_beta(split_dataset: Dataset) -> None:
    _, history = train(
        _model(split_dataset), split_dataset, split_dataset.taxonomy, _cfg(epochs=1, loss_mode="static:1,0.1")
    )
    record = history.records[0]
    assert record.beta is None
    assert "beta" not in record.to_log_record()


def test_disabled_terms_are_recorded_as_zero(split_dataset: Dataset) -> None:
    _, history = train(
        _model(split_dataset), split_dataset, split_dataset.taxonomy, _cfg(epochs=1, ham=False, scl=False)
    )
    components = history.records[0].components
    assert components["ia"] == 0.0 and components["reg"] == 0.0
    assert components["ba"] > 0.0


def test_loss_decreases_on_easy_data(split_dataset: Dataset) -> None:
    _, history = train(
        _model(split_dataset),
        split_dataset,
        split_dataset.taxonomy,
        _cfg(epochs=12, loss_mode="static:1,0", learning_rate=2e-2),
    )
    assert history.records[-1].loss < history.records[0].loss


def test_last_incomplete_batch_is_kept(split_dataset: Dataset) -> None:
    seen = []

    def build(m, tape, bags):
        seen.append(len(bags))
        return hmil_components(m, tape, bags, projection_matrix(split_dataset.taxonomy), _cfg())

    P = projection_matrix(split_dataset.taxonomy)
    fit(
        _model(split_dataset),
        split_dataset,
        _cfg(epochs=1, batch_size=12),
        build_components=build,
        score=lambda m, bags: hmil_scores(m, bags, P),
        weights_for=lambda e: ({name: 1.0 for name in COMPONENTS}, None),
        columns=COMPONENTS,
        select_key="val_fine_macro_auc",
    )
    assert seen == [12, 12, 4]


def test_non_finite_loss_is_reported(split_dataset: Dataset) -> None:
    P = projection_matrix(split_dataset.taxonomy)

    def build(m, tape, bags):
        components = hmil_components(m, tape, bags, P, _cfg())
        components["ce_f"] = ops.scale(components["ce_f"], float("inf"))
        return components

    with pytest.raises(NumericError, match="ce_f loss at epoch 0, batch 0"):
        fit(
            _model(split_dataset),
            split_dataset,
            _cfg(epochs=1),
            build_components=build,
            score=lambda m, bags: hmil_scores(m, bags, P),
            weights_for=lambda e: ({name: 1.0 for name in COMPONENTS}, None),
            columns=COMPONENTS,
            select_key="val_fine_macro_auc",
        )


def test_empty_validation_split(tiny_dataset: Dataset) -> None:
    ds = make_splits(tiny_dataset, RatioSplit(train=0.8, val=0.0, test=0.2), seed=0)
    with pytest.raises(DatasetError, match="empty split"):
        train(_model(ds), ds, ds.taxonomy, _cfg())


def test_incompatible_model(split_dataset: Dataset) -> None:
    wrong = init_model(HmilConfig(d_c=12, n_coarse=2, n_fine=4))
    with pytest.raises(CompatibilityError, match="d_c"):
        train(wrong, split_dataset, split_dataset.taxonomy, _cfg())
