import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from fairadapt.autodiff import (
    SGD,
    Adam,
    Tape,
    Tensor,
    absolute,
    add,
    add_rowwise,
    backward,
    identity,
    matmul,
    mean,
    relu,
    scale,
    softmax_cross_entropy,
    sort_columns,
    square,
    sub,
    take_rows,
    total,
)
from fairadapt.errors import DomainError, ShapeError, UsageError
from oracles import central_difference, relative_error


def grad_of(build, *arrays):
    """Analytic gradients of ``build(*tensors)`` w.r.t. each input array."""
    ts = [Tensor(a.copy(), requires_grad=True) for a in arrays]
    with Tape() as tape:
        out = build(*ts)
    backward(out, tape)
    return [t.grad for t in ts]


def value_of(build, *arrays):
    return build(*[Tensor(a) for a in arrays]).item()


def away_from_zero(rng, shape, margin=0.05):
    x = rng.normal(size=shape)
    return np.where(np.abs(x) < margin, np.sign(x + 1e-12) * margin, x)


OPS = {
    "matmul": (lambda a, b: total(matmul(a, b)), lambda r: [r.normal(size=(3, 4)), r.normal(size=(4, 2))]),
    "add_rowwise": (lambda a, b: total(square(add_rowwise(a, b))), lambda r: [r.normal(size=(5, 3)), r.normal(size=(1, 3))]),
    "add": (lambda a, b: total(square(add(a, b))), lambda r: [r.normal(size=(2, 3)), r.normal(size=(2, 3))]),
    "sub": (lambda a, b: total(square(sub(a, b))), lambda r: [r.normal(size=(2, 3)), r.normal(size=(2, 3))]),
    "scale": (lambda a: total(square(scale(a, -1.7))), lambda r: [r.normal(size=(3, 3))]),
    "relu": (lambda a: total(square(relu(a))), lambda r: [away_from_zero(r, (4, 3))]),
    "identity": (lambda a: total(square(identity(a))), lambda r: [r.normal(size=(2, 2))]),
    "square": (lambda a: mean(square(a)), lambda r: [r.normal(size=(3, 2))]),
    "absolute": (lambda a: mean(absolute(a)), lambda r: [away_from_zero(r, (3, 2))]),
    "total": (lambda a: total(square(a)), lambda r: [r.normal(size=(4, 1))]),
    "mean": (lambda a: mean(square(a)), lambda r: [r.normal(size=(4, 5))]),
    "take_rows": (lambda a: total(square(take_rows(a, np.array([2, 0, 2, 3])))), lambda r: [r.normal(size=(4, 3))]),
    "sort_columns": (
        lambda a: total(matmul(sort_columns(a), Tensor(np.arange(1.0, 4.0).reshape(3, 1)))),
        lambda r: [r.normal(size=(6, 3))],
    ),
    "softmax_cross_entropy": (
        lambda a: softmax_cross_entropy(a, np.array([0, 1, 1, 0, 1])),
        lambda r: [2 * r.normal(size=(5, 2))],
    ),
}


@pytest.mark.parametrize("name", sorted(OPS))
def test_op_gradient_matches_finite_differences(name):
    build, make = OPS[name]
    rng = np.random.default_rng(7)
    for _ in range(10):
        arrays = make(rng)
        analytic = grad_of(build, *arrays)
        numeric = central_difference(lambda: value_of(build, *arrays), arrays)
        assert relative_error(analytic, numeric) < 1e-6


def test_shared_input_accumulates_from_both_paths():
    x = np.array([[1.0, -2.0]])
    (g,) = grad_of(lambda t: total(add(square(t), scale(t, 3.0))), x)
    np.testing.assert_allclose(g, 2 * x + 3)


def test_leaf_gradient_accumulates_across_backward_calls():
    t = Tensor([[2.0]], requires_grad=True)
    for _ in range(2):
        with Tape() as tape:
            out = square(t)
        backward(out, tape)
    assert t.grad[0, 0] == pytest.approx(8.0)


def test_backward_requires_scalar():
    t = Tensor(np.ones((2, 2)), requires_grad=True)
    with Tape() as tape:
        out = square(t)
    with pytest.raises(ShapeError):
        backward(out, tape)


def test_backward_on_a_foreign_tape_is_rejected():
    t = Tensor([[1.0]], requires_grad=True)
    with Tape():
        out = square(t)
    with pytest.raises(UsageError):
        backward(out, Tape())


def test_nothing_is_recorded_without_an_active_tape():
    t = Tensor([[1.0]], requires_grad=True)
    out = square(t)
    assert out._node is None and not out.requires_grad


def test_frozen_inputs_receive_no_gradient():
    w = Tensor([[1.0, 2.0]], requires_grad=True)
    x = Tensor([[3.0], [4.0]])
    with Tape() as tape:
        out = total(matmul(x, w))
    backward(out, tape)
    assert x.grad is None and w.grad is not None


def test_softmax_cross_entropy_uniform_logits_is_log2():
    out = softmax_cross_entropy(Tensor(np.zeros((4, 2))), [0, 1, 1, 0])
    assert out.item() == pytest.approx(np.log(2))


def test_softmax_cross_entropy_is_stable_for_huge_logits():
    out = softmax_cross_entropy(Tensor([[1e4, -1e4], [-1e4, 1e4]]), [1, 0])
    assert out.item() == pytest.approx(2e4)
    assert softmax_cross_entropy(Tensor([[1e4, -1e4]]), [0]).item() == 0.0


def test_softmax_cross_entropy_rejects_bad_input():
    with pytest.raises(DomainError):
        softmax_cross_entropy(Tensor(np.zeros((0, 2))), [])
    with pytest.raises(DomainError):
        softmax_cross_entropy(Tensor(np.zeros((2, 2))), [0, 2])
    with pytest.raises(ShapeError):
        softmax_cross_entropy(Tensor(np.zeros((2, 3))), [0, 1])


def test_tensor_promotes_vectors_to_rows():
    assert Tensor([1.0, 2.0, 3.0]).shape == (1, 3)
    assert Tensor(5.0).shape == (1, 1)


def test_adam_first_step_moves_by_lr_times_sign():
    p = Tensor([[1.0, -1.0, 0.5]], requires_grad=True)
    opt = Adam([p], lr=0.1)
    p.grad = np.array([[3.0, -0.2, 1e-3]])
    opt.step()
    # bias-corrected m/sqrt(v) is sign(g) on the first step (up to eps)
    np.testing.assert_allclose(p.data, [[0.9, -0.9, 0.4]], atol=1e-4)
    assert p.grad is None


def test_adam_matches_hand_rolled_recurrence():
    rng = np.random.default_rng(0)
    p = Tensor(rng.normal(size=(2, 3)), requires_grad=True)
    ref = p.data.copy()
    m = np.zeros_like(ref)
    v = np.zeros_like(ref)
    opt = Adam([p], lr=1e-2)
    for t in range(1, 6):
        g = rng.normal(size=ref.shape)
        p.grad = g.copy()
        opt.step()
        m = 0.9 * m + 0.1 * g
        v = 0.999 * v + 0.001 * g * g
        ref = ref - 1e-2 * (m / (1 - 0.9 ** t)) / (np.sqrt(v / (1 - 0.999 ** t)) + 1e-8)
    np.testing.assert_allclose(p.data, ref, rtol=1e-12)


def test_optimizer_without_gradient_is_a_usage_error():
    p = Tensor([[1.0]], requires_grad=True)
    with pytest.raises(UsageError):
        Adam([p], 0.1).step()
    with pytest.raises(UsageError):
        SGD([p], 0.1).step()


def test_sgd_step():
    p = Tensor([[1.0, 2.0]], requires_grad=True)
    p.grad = np.array([[1.0, -1.0]])
    SGD([p], 0.5).step()
    np.testing.assert_array_equal(p.data, [[0.5, 2.5]])


finite = st.floats(-10, 10, allow_nan=False, allow_infinity=False)


@settings(max_examples=50, deadline=None)
@given(arrays(np.float64, (5, 3), elements=finite), arrays(np.float64, (5, 3), elements=finite))
def test_gradient_is_linear_in_the_loss(x, y):
    def build(t):
        return total(sub(scale(square(t), 2.0), square(t)))

    (g_combined,) = grad_of(build, x)
    (g_single,) = grad_of(lambda t: total(square(t)), x)
    np.testing.assert_allclose(g_combined, g_single, atol=1e-9)


@settings(max_examples=50, deadline=None)
@given(arrays(np.float64, (7, 2), elements=finite))
def test_sort_columns_sorts_and_routes_gradients_back(x):
    t = Tensor(x, requires_grad=True)
    weights = np.arange(7.0).reshape(7, 1)
    with Tape() as tape:
        s = sort_columns(t)
        out = total(matmul(Tensor(weights.T), s))
    backward(out, tape)
    np.testing.assert_array_equal(s.data, np.sort(x, axis=0))
    # gradient is a permutation of the weights in each column
    for j in range(2):
        np.testing.assert_array_equal(np.sort(t.grad[:, j]), weights[:, 0])
