"""Minimal tape-based reverse-mode autodiff over dense 2D float64 arrays.

Operations executed while a :class:`Tape` is active record themselves on it
whenever at least one input requires a gradient. :func:`backward` then sweeps
the tape once in reverse order.

>>> w = Tensor([[2.0]], requires_grad=True)
>>> with Tape() as tape:
...     loss = total(matmul(Tensor([[3.0]]), w))
>>> backward(loss, tape)
>>> w.grad
array([[3.]])
"""

from __future__ import annotations

import contextvars
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .errors import DomainError, ShapeError, UsageError

_ACTIVE_TAPE: contextvars.ContextVar["Tape | None"] = contextvars.ContextVar(
    "fairadapt_active_tape", default=None
)


class Tensor:
    """Dense 2D float64 matrix with an optional gradient slot."""

    __slots__ = ("data", "grad", "requires_grad", "_node")

    def __init__(self, data, requires_grad: bool = False):
        arr = np.asarray(data, dtype=np.float64)
        if arr.ndim == 0:
            arr = arr.reshape(1, 1)
        elif arr.ndim == 1:
            arr = arr.reshape(1, -1)
        elif arr.ndim != 2:
            raise ShapeError(f"Tensor must be 2D, got shape {arr.shape}")
        self.data = arr
        self.grad: np.ndarray | None = None
        self.requires_grad = requires_grad
        self._node: _Node | None = None

    @property
    def shape(self) -> tuple[int, int]:
        return self.data.shape

    def item(self) -> float:
        if self.data.size != 1:
            raise ShapeError(f"item() needs a 1x1 tensor, got {self.shape}")
        return float(self.data[0, 0])

    def zero_grad(self) -> None:
        self.grad = None

    def __repr__(self) -> str:
        flag = ", requires_grad=True" if self.requires_grad else ""
        return f"Tensor({self.data!r}{flag})"

    def __matmul__(self, other: Tensor) -> Tensor:
        return matmul(self, other)

    def __add__(self, other: Tensor) -> Tensor:
        return add(self, other)

    def __sub__(self, other: Tensor) -> Tensor:
        return sub(self, other)

    def __mul__(self, factor: float) -> Tensor:
        return scale(self, factor)

    __rmul__ = __mul__

    def __neg__(self) -> Tensor:
        return scale(self, -1.0)


@dataclass(eq=False)
class _Node:
    inputs: tuple[Tensor, ...]
    output: Tensor
    backward: Callable[[np.ndarray], Sequence[np.ndarray | None]]
    tape: "Tape"


class Tape:
    """Ordered record of differentiable operations.

    Nodes are appended as operations execute, so the list is topologically
    ordered by construction. One tape belongs to one thread of execution.
    """

    def __init__(self):
        self.nodes: list[_Node] = []
        self._token = None

    def __enter__(self) -> Tape:
        self._token = _ACTIVE_TAPE.set(self)
        return self

    def __exit__(self, *exc) -> None:
        _ACTIVE_TAPE.reset(self._token)
        self._token = None

    def __len__(self) -> int:
        return len(self.nodes)


def _record(out_data: np.ndarray, inputs: tuple[Tensor, ...], rule) -> Tensor:
    out = Tensor(out_data)
    tape = _ACTIVE_TAPE.get()
    if tape is not None and any(t.requires_grad for t in inputs):
        out.requires_grad = True
        node = _Node(inputs, out, rule, tape)
        out._node = node
        tape.nodes.append(node)
    return out


def backward(loss: Tensor, tape: Tape) -> None:
    """Accumulate d(loss)/d(t) into ``t.grad`` for every tensor reachable on ``tape``."""
    if loss.shape != (1, 1):
        raise ShapeError(f"backward needs a 1x1 loss, got {loss.shape}")
    if not loss.requires_grad:
        return
    if loss._node is None or loss._node.tape is not tape:
        raise UsageError("loss was not produced on the given tape")

    grads: dict[int, np.ndarray] = {id(loss): np.ones((1, 1))}
    for node in reversed(tape.nodes):
        g = grads.pop(id(node.output), None)
        if g is None:
            continue
        _accumulate(node.output, g)
        for inp, gi in zip(node.inputs, node.backward(g)):
            if gi is None or not inp.requires_grad:
                continue
            key = id(inp)
            if inp._node is None:
                _accumulate(inp, gi)
            elif key in grads:
                grads[key] = grads[key] + gi
            else:
                grads[key] = gi


def _accumulate(t: Tensor, g: np.ndarray) -> None:
    if t.grad is None:
        t.grad = np.array(g, dtype=np.float64, copy=True)
    else:
        t.grad += g


# ---------------------------------------------------------------------------
# operations


def matmul(a: Tensor, b: Tensor) -> Tensor:
    if a.shape[1] != b.shape[0]:
        raise ShapeError(f"matmul shape mismatch: {a.shape} @ {b.shape}")

    def rule(g):
        ga = g @ b.data.T if a.requires_grad else None
        gb = a.data.T @ g if b.requires_grad else None
        return ga, gb

    return _record(a.data @ b.data, (a, b), rule)


def add_rowwise(a: Tensor, bias: Tensor) -> Tensor:
    """Add a 1×n bias to every row of an m×n tensor."""
    if bias.shape[0] != 1 or bias.shape[1] != a.shape[1]:
        raise ShapeError(f"add_rowwise shape mismatch: {a.shape} + {bias.shape}")
    return _record(
        a.data + bias.data, (a, bias), lambda g: (g, g.sum(axis=0, keepdims=True))
    )


def add(a: Tensor, b: Tensor) -> Tensor:
    if a.shape != b.shape:
        raise ShapeError(f"add shape mismatch: {a.shape} + {b.shape}")
    return _record(a.data + b.data, (a, b), lambda g: (g, g))


def sub(a: Tensor, b: Tensor) -> Tensor:
    if a.shape != b.shape:
        raise ShapeError(f"sub shape mismatch: {a.shape} - {b.shape}")
    return _record(a.data - b.data, (a, b), lambda g: (g, -g))


def scale(a: Tensor, factor: float) -> Tensor:
    factor = float(factor)
    return _record(a.data * factor, (a,), lambda g: (g * factor,))


def relu(a: Tensor) -> Tensor:
    mask = a.data > 0
    return _record(np.where(mask, a.data, 0.0), (a,), lambda g: (g * mask,))


def identity(a: Tensor) -> Tensor:
    return a


def square(a: Tensor) -> Tensor:
    return _record(a.data * a.data, (a,), lambda g: (2.0 * a.data * g,))


def absolute(a: Tensor) -> Tensor:
    sign = np.sign(a.data)
    return _record(np.abs(a.data), (a,), lambda g: (g * sign,))


def total(a: Tensor) -> Tensor:
    """Sum of all entries as a 1×1 tensor."""
    shape = a.shape
    return _record(
        np.array([[a.data.sum()]]), (a,), lambda g: (np.full(shape, g[0, 0]),)
    )


def mean(a: Tensor) -> Tensor:
    shape = a.shape
    n = a.data.size
    return _record(
        np.array([[a.data.mean()]]), (a,), lambda g: (np.full(shape, g[0, 0] / n),)
    )


def take_rows(a: Tensor, index: np.ndarray) -> Tensor:
    index = np.asarray(index, dtype=np.intp)
    shape = a.shape

    def rule(g):
        out = np.zeros(shape)
        np.add.at(out, index, g)
        return (out,)

    return _record(a.data[index], (a,), rule)


def sort_columns(a: Tensor) -> Tensor:
    """Sort every column ascending; gradients follow the sorting permutation."""
    order = np.argsort(a.data, axis=0)
    shape = a.shape

    def rule(g):
        out = np.empty(shape)
        np.put_along_axis(out, order, g, axis=0)
        return (out,)

    return _record(np.take_along_axis(a.data, order, axis=0), (a,), rule)


def softmax_cross_entropy(logits: Tensor, labels) -> Tensor:
    """Mean over rows of ``-log softmax(logits)[label]`` for two-logit rows."""
    labels = np.asarray(labels).reshape(-1)
    m = labels.shape[0]
    if m == 0 or logits.shape[0] == 0:
        raise DomainError("softmax_cross_entropy on an empty batch")
    if logits.shape != (m, 2):
        raise ShapeError(
            f"logits shape {logits.shape} does not match {m} labels with 2 classes"
        )
    if not np.all((labels == 0) | (labels == 1)):
        raise DomainError("labels must be 0 or 1")
    labels = labels.astype(np.intp)

    z = logits.data
    shifted = z - z.max(axis=1, keepdims=True)
    expz = np.exp(shifted)
    denom = expz.sum(axis=1, keepdims=True)
    log_probs = shifted - np.log(denom)
    rows = np.arange(m)
    loss = -log_probs[rows, labels].mean()
    # clamp -0.0 and tiny negative rounding so the loss is never below zero
    loss = max(loss, 0.0)

    def rule(g):
        grad = expz / denom
        grad[rows, labels] -= 1.0
        return (grad * (g[0, 0] / m),)

    return _record(np.array([[loss]]), (logits,), rule)


# ---------------------------------------------------------------------------
# optimizers


@dataclass
class AdamState:
    m: np.ndarray
    v: np.ndarray
    t: int = 0


BETA1 = 0.9
BETA2 = 0.999
EPS = 1e-8


def adam_step(params: Sequence[Tensor], state: list[AdamState], lr: float) -> None:
    """In-place bias-corrected Adam update; clears gradients afterwards."""
    if len(state) != len(params):
        raise UsageError("Adam state does not match the parameter list")
    for p, s in zip(params, state):
        if p.grad is None:
            raise UsageError(f"parameter of shape {p.shape} has no gradient")
        if s.m.shape != p.shape:
            raise ShapeError(f"Adam state shape {s.m.shape} != parameter {p.shape}")
    for p, s in zip(params, state):
        g = p.grad
        s.t += 1
        s.m *= BETA1
        s.m += (1.0 - BETA1) * g
        s.v *= BETA2
        s.v += (1.0 - BETA2) * (g * g)
        m_hat = s.m / (1.0 - BETA1**s.t)
        v_hat = s.v / (1.0 - BETA2**s.t)
        p.data -= lr * m_hat / (np.sqrt(v_hat) + EPS)
        p.grad = None


class Adam:
    """Adam bound to a fixed parameter list, with its own moment buffers."""

    def __init__(self, params: Sequence[Tensor], lr: float):
        self.params = list(params)
        self.lr = lr
        self.state = [
            AdamState(np.zeros(p.shape), np.zeros(p.shape)) for p in self.params
        ]

    def step(self) -> None:
        adam_step(self.params, self.state, self.lr)


class SGD:
    def __init__(self, params: Sequence[Tensor], lr: float):
        self.params = list(params)
        self.lr = lr

    def step(self) -> None:
        for p in self.params:
            if p.grad is None:
                raise UsageError(f"parameter of shape {p.shape} has no gradient")
        for p in self.params:
            p.data -= self.lr * p.grad
            p.grad = None


def make_optimizer(kind: str, params: Sequence[Tensor], lr: float):
    if kind == "adam":
        return Adam(params, lr)
    if kind == "sgd":
        return SGD(params, lr)
    raise ValueError(f"unknown optimizer {kind!r}")
