"""Task, fairness, and sliced-Wasserstein alignment losses."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .autodiff import (
    Tensor,
    absolute,
    add,
    matmul,
    mean,
    scale,
    softmax_cross_entropy,
    sort_columns,
    square,
    sub,
    take_rows,
)
from .errors import ConfigError, DomainError, ShapeError
from .model import FairModel, encode, predict_attribute, predict_label


@dataclass(frozen=True)
class LossWeights:
    alpha: float = 1.0
    beta: float = 1.0
    gamma: float = 1.0

    def __post_init__(self):
        for name in ("alpha", "beta", "gamma"):
            v = getattr(self, name)
            if not math.isfinite(v) or v < 0:
                raise ConfigError(f"loss weight {name} must be finite and >= 0, got {v}")


def _rows(X) -> int:
    return np.asarray(X).shape[0] if not isinstance(X, Tensor) else X.shape[0]


def task_loss(model: FairModel, batch) -> Tensor:
    """Cross-entropy of the label head on ``batch = (X, a, y)``."""
    X, a, y = batch
    if _rows(X) == 0:
        raise DomainError("task_loss on an empty batch")
    return softmax_cross_entropy(predict_label(model, encode(model, X, a)), y)


def fairness_loss(model: FairModel, batch) -> Tensor:
    """Cross-entropy of the attribute head predicting ``a`` on ``batch = (X, a, ...)``.

    Labels are never looked at, so target batches work as well.
    """
    X, a = batch[0], batch[1]
    if _rows(X) == 0:
        raise DomainError("fairness_loss on an empty batch")
    return softmax_cross_entropy(predict_attribute(model, encode(model, X, a)), a)


def wd1_squared(p, q, order: int = 2) -> Tensor:
    """Mean ``|p_i - q_i|**order`` between two ascending columns of equal length.

    For equal-size empirical measures on the line the sorted matching is
    optimal, so with ``order=2`` this is the squared 2-Wasserstein distance.
    Multi-column inputs are treated as independent slices and averaged.
    """
    p = p if isinstance(p, Tensor) else Tensor(np.asarray(p, dtype=np.float64).reshape(-1, 1))
    q = q if isinstance(q, Tensor) else Tensor(np.asarray(q, dtype=np.float64).reshape(-1, 1))
    if p.shape != q.shape:
        raise ShapeError(f"wd1_squared length mismatch: {p.shape} vs {q.shape}")
    if p.shape[0] == 0:
        raise DomainError("wd1_squared on empty inputs")
    diff = sub(p, q)
    if order == 2:
        return mean(square(diff))
    if order == 1:
        return mean(absolute(diff))
    raise ConfigError(f"unsupported Wasserstein order {order}")


def random_directions(z: int, K: int, rng: np.random.Generator) -> np.ndarray:
    """``K`` unit vectors drawn uniformly from the sphere in R^z, as columns."""
    if K <= 0:
        raise ConfigError(f"number of projections must be positive, got {K}")
    g = rng.standard_normal((z, K))
    return g / np.linalg.norm(g, axis=0, keepdims=True)


def sliced_wasserstein(
    zs: Tensor, zt: Tensor, K: int, rng: np.random.Generator,
    order: int = 2, directions: np.ndarray | None = None,
) -> Tensor:
    """Average 1D Wasserstein cost over ``K`` random slices of two point clouds."""
    if K <= 0:
        raise ConfigError(f"number of projections must be positive, got {K}")
    if zs.shape[0] == 0 or zt.shape[0] == 0:
        raise DomainError("sliced Wasserstein needs nonempty batches")
    if zs.shape[1] != zt.shape[1]:
        raise ShapeError(f"latent widths differ: {zs.shape} vs {zt.shape}")
    ns, nt = zs.shape[0], zt.shape[0]
    if ns > nt:
        zs = take_rows(zs, np.sort(rng.choice(ns, nt, replace=False)))
    elif nt > ns:
        zt = take_rows(zt, np.sort(rng.choice(nt, ns, replace=False)))
    if directions is None:
        directions = random_directions(zs.shape[1], K, rng)
    gamma = Tensor(directions)
    ps = sort_columns(matmul(zs, gamma))
    pt = sort_columns(matmul(zt, gamma))
    return wd1_squared(ps, pt, order)


def swd_loss(model: FairModel, source_batch, target_batch, K: int, rng, order: int = 2) -> Tensor:
    """Sliced Wasserstein distance between encoded source and target batches."""
    if K <= 0:
        raise ConfigError(f"number of projections must be positive, got {K}")
    zs = encode(model, source_batch[0], source_batch[1])
    zt = encode(model, target_batch[0], target_batch[1])
    return sliced_wasserstein(zs, zt, K, rng, order)


def total_loss(weights: LossWeights, parts) -> Tensor:
    """``task + alpha*fair_src + beta*fair_tar + gamma*swd`` on the current tape."""
    task, fair_src, fair_tar, swd = parts
    out = task
    for w, part in ((weights.alpha, fair_src), (weights.beta, fair_tar), (weights.gamma, swd)):
        out = add(out, scale(part, w))
    return out
