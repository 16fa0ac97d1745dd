from pathlib import Path

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from pydantic import ValidationError

from hmil.model import HmilConfig, forward, init_model, load_checkpoint, predict, save_checkpoint
from hmil.model.checkpoint import MAGIC, decode_checkpoint, encode_checkpoint
from hmil.model.network import parameter_shapes
from hmil.tensor import Tape
from shared.errors import FormatError, ShapeError


def _model(use_ofr: bool = True, seed: int = 0):
    return init_model(HmilConfig(d_c=8, n_coarse=2, n_fine=4, use_ofr=use_ofr, seed=seed))


def test_default_widths() -> None:
    cfg = HmilConfig(d_c=16, n_coarse=2, n_fine=4)
    assert cfg.fine_width == 4
    assert cfg.hidden_width == 8
    assert HmilConfig(d_c=16, n_coarse=2, n_fine=4, use_ofr=False).fine_width == 16


@pytest.mark.parametrize(
    "kwargs",
    [
        dict(d_c=8, n_coarse=3, n_fine=2),
        dict(d_c=10, n_coarse=2, n_fine=4),
        dict(d_c=8, d_f=4, n_coarse=2, n_fine=4, use_ofr=False),
        dict(d_c=0, n_coarse=1, n_fine=1),
    ],
)
def test_invalid_configs(kwargs) -> None:
    with pytest.raises(ValidationError):
        HmilConfig(**kwargs)


def test_init_is_seed_deterministic() -> None:
    a, b, c = _model(seed=1), _model(seed=1), _model(seed=2)
    assert a.params.keys() == b.params.keys()
    for name in a.params:
        assert np.array_equal(a.params[name], b.params[name])
    assert not np.array_equal(a.params["att_c.v1"], c.params["att_c.v1"])
    assert not np.any(a.params["cls_f.b"])


def test_no_ofr_model_has_no_reembedder_params() -> None:
    names = [n for n, _ in parameter_shapes(_model(use_ofr=False).config)]
    assert not any(n.startswith("ofr.") for n in names)


def test_forward_shapes() -> None:
    model = _model()
    h = np.random.default_rng(0).normal(size=(5, 8))
    out = forward(model, h)
    assert out.h_f.shape == (5, 2)
    assert out.A_c.shape == (2, 5)
    assert out.A_f.shape == (4, 5)
    assert out.B_c.shape == (2, 8)
    assert out.B_f.shape == (4, 2)
    assert out.p_c.shape == (1, 2)
    assert out.p_f.shape == (1, 4)


def test_single_instance_attention_is_one() -> None:
    out = forward(_model(), np.ones((1, 8)))
    np.testing.assert_array_equal(out.A_c.value, np.ones((2, 1)))
    np.testing.assert_array_equal(out.A_f.value, np.ones((4, 1)))


def test_forward_rejects_wrong_width() -> None:
    with pytest.raises(ShapeError):
        forward(_model(), np.ones((3, 7)))


def test_bags_on_one_tape_share_parameter_leaves() -> None:
    model = _model()
    tape = Tape()
    forward(model, np.ones((2, 8)), tape)
    before = dict(tape.parameters)
    forward(model, np.zeros((3, 8)), tape)
    assert tape.parameters == before


@settings(max_examples=100, deadline=None)
@given(
    seed=st.integers(min_value=0, max_value=2**32 - 1),
    n=st.integers(min_value=1, max_value=12),
    use_ofr=st.booleans(),
)
def test_forward_outputs_are_normalized(seed: int, n: int, use_ofr: bool) -> None:
    rng = np.random.default_rng(seed)
    out = forward(_model(use_ofr=use_ofr, seed=seed % 7), rng.normal(scale=3.0, size=(n, 8)))
    for node in (out.A_c, out.A_f, out.p_c, out.p_f):
        assert np.all(node.value >= 0.0)
        np.testing.assert_allclose(node.value.sum(axis=1), 1.0, atol=1e-9)


@settings(max_examples=30, deadline=None)
@given(seed=st.integers(min_value=0, max_value=2**32 - 1))
def test_probabilities_invariant_to_instance_order(seed: int) -> None:
    rng = np.random.default_rng(seed)
    model = _model()
    h = rng.normal(size=(6, 8))
    perm = rng.permutation(6)
    a, b = forward(model, h), forward(model, h[perm])
    np.testing.assert_allclose(a.p_c.value, b.p_c.value, atol=1e-12)
    np.testing.assert_allclose(a.p_f.value, b.p_f.value, atol=1e-12)


def test_predict_stacks_rows() -> None:
    rng = np.random.default_rng(1)
    bags = [rng.normal(size=(n, 8)) for n in (2, 5, 3)]
    p_c, p_f = predict(_model(), bags)
    assert p_c.shape == (3, 2) and p_f.shape == (3, 4)
    np.testing.assert_allclose(p_f[1], forward(_model(), bags[1]).p_f.value[0])


def test_checkpoint_round_trip(tmp_path: Path) -> None:
    model = _model(seed=4)
    taxonomy = {"coarse": ["a", "b"], "fine": ["w", "x", "y", "z"], "parent": {}}
    path = save_checkpoint(
        tmp_path / "m.hmil", "hmil", model.config.model_dump(mode="json"), taxonomy, model.params
    )
    ckpt = load_checkpoint(path)
    assert ckpt.kind == "hmil"
    assert HmilConfig.model_validate(ckpt.config) == model.config
    assert ckpt.taxonomy == taxonomy
    for name, value in model.params.items():
        assert np.array_equal(ckpt.params[name], value)


def test_checkpoint_format_errors_carry_offsets() -> None:
    data = encode_checkpoint("hmil", {}, {}, {"w": np.ones((2, 2))})
    assert data.startswith(MAGIC)
    with pytest.raises(FormatError) as bad_magic:
        decode_checkpoint(b"XXXX" + data[4:])
    assert bad_magic.value.offset == 0
    with pytest.raises(FormatError) as bad_version:
        decode_checkpoint(data[:4] + (2).to_bytes(4, "little") + data[8:])
    assert bad_version.value.offset == 4
    with pytest.raises(FormatError, match="truncated"):
        decode_checkpoint(data[:-3])
    with pytest.raises(FormatError) as trailing:
        decode_checkpoint(data + b"\x00")
    assert trailing.value.offset == len(data)
