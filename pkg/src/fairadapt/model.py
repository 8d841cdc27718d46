"""Encoder, label head and sensitive-attribute head of the fair classifier."""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .autodiff import Tensor, add_rowwise, matmul, relu
from .errors import SchemaError, ShapeError

LATENT_DIM = 20
GROUPS = ("u", "v", "w")
PARAM_NAMES = ("W_e", "b_e", "W_g", "b_g", "W_h", "b_h")
_GROUP_OF = {"W_e": "u", "b_e": "u", "W_g": "v", "b_g": "v", "W_h": "w", "b_h": "w"}

_MAGIC = b"FAIRADAPT-CKPT 1\n"


@dataclass
class FairModel:
    """Parameters of the encoder (u), label head (v) and attribute head (w).

    The encoder sees the features concatenated with the sensitive attribute,
    so ``W_e`` has ``n + 1`` rows.
    """

    W_e: Tensor
    b_e: Tensor
    W_g: Tensor
    b_g: Tensor
    W_h: Tensor
    b_h: Tensor
    activation: str = "relu"

    @property
    def n_features(self) -> int:
        return self.W_e.shape[0] - 1

    @property
    def latent_dim(self) -> int:
        return self.W_e.shape[1]

    def params(self, *groups: str) -> list[Tensor]:
        groups = groups or GROUPS
        return [getattr(self, p) for p in PARAM_NAMES if _GROUP_OF[p] in groups]

    def named_params(self) -> dict[str, Tensor]:
        return {p: getattr(self, p) for p in PARAM_NAMES}

    def set_trainable(self, *groups: str) -> None:
        """Only parameters of ``groups`` receive gradients from now on."""
        for name, t in self.named_params().items():
            t.requires_grad = _GROUP_OF[name] in groups
            t.grad = None

    def snapshot(self) -> dict[str, np.ndarray]:
        return {p: t.data.copy() for p, t in self.named_params().items()}

    def copy(self) -> FairModel:
        return FairModel.from_arrays(self.snapshot(), self.activation)

    @classmethod
    def from_arrays(cls, arrays: dict[str, np.ndarray], activation: str = "relu") -> FairModel:
        return cls(**{p: Tensor(np.array(arrays[p], dtype=np.float64)) for p in PARAM_NAMES},
                   activation=activation)


def _glorot(rng: np.random.Generator, fan_in: int, fan_out: int) -> np.ndarray:
    limit = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-limit, limit, size=(fan_in, fan_out))


def init_model(n: int, z: int = LATENT_DIM, seed: int = 0, activation: str = "relu") -> FairModel:
    """Glorot-uniform weights, zero biases; deterministic in ``seed``."""
    if n < 1 or z < 1:
        raise ValueError(f"need n >= 1 and z >= 1, got n={n}, z={z}")
    if activation not in ("relu", "identity"):
        raise ValueError(f"unknown activation {activation!r}")
    rng = np.random.default_rng(seed)
    return FairModel(
        W_e=Tensor(_glorot(rng, n + 1, z)),
        b_e=Tensor(np.zeros((1, z))),
        W_g=Tensor(_glorot(rng, z, 2)),
        b_g=Tensor(np.zeros((1, 2))),
        W_h=Tensor(_glorot(rng, z, 2)),
        b_h=Tensor(np.zeros((1, 2))),
        activation=activation,
    )


def encoder_input(X, a) -> np.ndarray:
    X = np.asarray(X, dtype=np.float64)
    a = np.asarray(a, dtype=np.float64).reshape(-1, 1)
    if X.ndim != 2 or X.shape[0] != a.shape[0]:
        raise ShapeError(f"features {X.shape} and attribute {a.shape} are not row-aligned")
    return np.hstack([X, a])


def encode(model: FairModel, X, a=None) -> Tensor:
    """Latent codes ``act([X | a] W_e + b_e)``.

    With ``a=None``, ``X`` must already carry the attribute as its last column.
    """
    xa = np.asarray(X, dtype=np.float64) if a is None else encoder_input(X, a)
    if xa.ndim != 2 or xa.shape[1] != model.W_e.shape[0]:
        raise ShapeError(
            f"encoder expects {model.W_e.shape[0]} input columns, got {xa.shape}"
        )
    h = add_rowwise(matmul(Tensor(xa), model.W_e), model.b_e)
    return relu(h) if model.activation == "relu" else h


def predict_label(model: FairModel, latent: Tensor) -> Tensor:
    return add_rowwise(matmul(latent, model.W_g), model.b_g)


def predict_attribute(model: FairModel, latent: Tensor) -> Tensor:
    return add_rowwise(matmul(latent, model.W_h), model.b_h)


def hard_labels(logits: Tensor | np.ndarray) -> np.ndarray:
    """Argmax over the two logits; ties go to class 0."""
    z = logits.data if isinstance(logits, Tensor) else np.asarray(logits)
    return (z[:, 1] > z[:, 0]).astype(np.int8)


def predict(model: FairModel, X, a) -> np.ndarray:
    return hard_labels(predict_label(model, encode(model, X, a)))


def save_model(model: FairModel, path) -> None:
    """Binary checkpoint: magic line, JSON header with shapes, raw little-endian float64."""
    header = {
        "activation": model.activation,
        "params": [[p, list(getattr(model, p).shape)] for p in PARAM_NAMES],
    }
    with open(path, "wb") as fh:
        fh.write(_MAGIC)
        fh.write(json.dumps(header, sort_keys=True).encode() + b"\n")
        for p in PARAM_NAMES:
            fh.write(np.ascontiguousarray(getattr(model, p).data, dtype="<f8").tobytes())


def load_model(path) -> FairModel:
    path = Path(path)
    with open(path, "rb") as fh:
        if fh.readline() != _MAGIC:
            raise SchemaError(f"{path} is not a checkpoint file")
        header = json.loads(fh.readline())
        arrays = {}
        for name, shape in header["params"]:
            count = int(np.prod(shape))
            buf = fh.read(8 * count)
            if len(buf) != 8 * count:
                raise SchemaError(f"{path}: truncated parameter {name}")
            arrays[name] = np.frombuffer(buf, dtype="<f8").reshape(shape).astype(np.float64)
    return FairModel.from_arrays(arrays, header["activation"])
