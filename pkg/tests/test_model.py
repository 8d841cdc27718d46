import numpy as np
import pytest

from fairadapt.errors import SchemaError, ShapeError
from fairadapt.model import (
    LATENT_DIM,
    encode,
    hard_labels,
    init_model,
    load_model,
    predict,
    predict_attribute,
    predict_label,
    save_model,
)


def test_shapes():
    m = init_model(7)
    assert m.W_e.shape == (8, LATENT_DIM)
    assert m.W_g.shape == (LATENT_DIM, 2) and m.W_h.shape == (LATENT_DIM, 2)
    X = np.ones((5, 7))
    a = np.array([0, 1, 0, 1, 1])
    latent = encode(m, X, a)
    assert latent.shape == (5, LATENT_DIM)
    assert (latent.data >= 0).all()
    assert predict_label(m, latent).shape == (5, 2)
    assert predict_attribute(m, latent).shape == (5, 2)


def test_encoder_input_with_attribute_column_appended():
    m = init_model(3, seed=4)
    X = np.random.default_rng(0).normal(size=(4, 3))
    a = np.array([1, 0, 1, 1])
    joined = np.hstack([X, a[:, None]])
    np.testing.assert_array_equal(encode(m, X, a).data, encode(m, joined).data)


def test_width_mismatch_is_a_shape_error():
    m = init_model(3)
    with pytest.raises(ShapeError):
        encode(m, np.ones((2, 4)), np.zeros(2))
    with pytest.raises(ShapeError):
        encode(m, np.ones((2, 3)), np.zeros(3))


def test_init_is_deterministic_and_seeded():
    a, b, c = init_model(5, seed=1), init_model(5, seed=1), init_model(5, seed=2)
    np.testing.assert_array_equal(a.W_e.data, b.W_e.data)
    assert not np.array_equal(a.W_e.data, c.W_e.data)
    assert not a.b_e.data.any()


def test_ties_go_to_class_zero():
    assert hard_labels(np.array([[0.0, 0.0], [1.0, 2.0], [3.0, -1.0]])).tolist() == [0, 1, 0]


def test_identity_activation_is_affine():
    m = init_model(2, 3, seed=0, activation="identity")
    X = np.array([[-5.0, -5.0]])
    expected = np.hstack([X, [[0.0]]]) @ m.W_e.data + m.b_e.data
    np.testing.assert_allclose(encode(m, X, [0]).data, expected)


def test_set_trainable_only_marks_named_groups():
    m = init_model(2)
    m.set_trainable("w")
    assert [p.requires_grad for p in m.params()] == [False, False, False, False, True, True]


def test_checkpoint_round_trip_is_bit_exact(tmp_path):
    m = init_model(6, seed=3)
    m.b_g.data[:] = [[np.pi, -np.e]]
    path = tmp_path / "m.ckpt"
    save_model(m, path)
    back = load_model(path)
    for name, t in m.named_params().items():
        assert np.array_equal(t.data, getattr(back, name).data)
    save_model(back, tmp_path / "again.ckpt")
    assert path.read_bytes() == (tmp_path / "again.ckpt").read_bytes()
    X = np.random.default_rng(0).normal(size=(10, 6))
    a = np.arange(10) % 2
    np.testing.assert_array_equal(predict(m, X, a), predict(back, X, a))


def test_corrupt_checkpoints_are_rejected(tmp_path):
    bad = tmp_path / "bad.ckpt"
    bad.write_bytes(b"not a checkpoint\n")
    with pytest.raises(SchemaError):
        load_model(bad)
    m = init_model(2)
    good = tmp_path / "good.ckpt"
    save_model(m, good)
    bad.write_bytes(good.read_bytes()[:-8])
    with pytest.raises(SchemaError):
        load_model(bad)
