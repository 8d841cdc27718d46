"""Accuracy and group-fairness metrics for binary predictions.

Every gap is an absolute difference of rates between the ``a == 0`` and
``a == 1`` groups. When a conditioning group is empty the metric is
undefined and the functions return ``None`` rather than a number.
"""

from __future__ import annotations

import csv
from dataclasses import asdict, dataclass, field
from typing import Optional

import numpy as np

from .errors import DomainError, ShapeError

UNDEFINED = None
UNDEFINED_TEXT = "undefined"


def _binary(*arrays):
    out = []
    n = None
    for arr in arrays:
        arr = np.asarray(arr).reshape(-1)
        if n is None:
            n = arr.shape[0]
        elif arr.shape[0] != n:
            raise ShapeError(f"length mismatch: {n} vs {arr.shape[0]}")
        if not np.all((arr == 0) | (arr == 1)):
            raise DomainError("metric inputs must be binary (0/1)")
        out.append(arr.astype(bool))
    if n == 0:
        raise DomainError("metrics need at least one sample")
    return out


def _rate(y_hat: np.ndarray, mask: np.ndarray) -> Optional[float]:
    count = int(mask.sum())
    if count == 0:
        return UNDEFINED
    return float(y_hat[mask].sum()) / count


def _gap(y_hat, a, cond) -> Optional[float]:
    r0 = _rate(y_hat, cond & ~a)
    r1 = _rate(y_hat, cond & a)
    if r0 is None or r1 is None:
        return UNDEFINED
    return abs(r0 - r1)


def balanced_accuracy(y_hat, y) -> float:
    """Mean of the per-class recalls.

    If only one class occurs in ``y`` its recall (plain accuracy) is returned;
    :func:`evaluate` flags that case in the report.
    """
    y_hat, y = _binary(y_hat, y)
    recalls = [r for r in (_rate(~y_hat, ~y), _rate(y_hat, y)) if r is not None]
    return sum(recalls) / len(recalls)


def delta_dp(y_hat, a) -> Optional[float]:
    y_hat, a = _binary(y_hat, a)
    return _gap(y_hat, a, np.ones_like(a))


def delta_eo(y_hat, y, a) -> Optional[float]:
    y_hat, y, a = _binary(y_hat, y, a)
    return _gap(y_hat, a, y)


def delta_ao(y_hat, y, a) -> Optional[float]:
    y_hat, y, a = _binary(y_hat, y, a)
    g1 = _gap(y_hat, a, y)
    g0 = _gap(y_hat, a, ~y)
    if g0 is None or g1 is None:
        return UNDEFINED
    return (g0 + g1) / 2.0


def is_degenerate(y_hat) -> bool:
    """True when every prediction is the same class."""
    y_hat = np.asarray(y_hat).reshape(-1)
    return bool(y_hat.size == 0 or np.all(y_hat == y_hat[0]))


@dataclass
class EvalReport:
    balanced_accuracy: float
    delta_dp: Optional[float]
    delta_eo: Optional[float]
    delta_ao: Optional[float]
    group_counts: dict = field(default_factory=dict)
    single_class: bool = False
    degenerate: bool = False

    def row(self) -> dict:
        """Flat dictionary with undefined values spelled out, for CSV output."""
        d = asdict(self)
        counts = d.pop("group_counts")
        for k, v in list(d.items()):
            if v is None:
                d[k] = UNDEFINED_TEXT
        for k, v in counts.items():
            d[f"n_{k}"] = v
        return d


def group_counts(y, a) -> dict:
    y = np.asarray(y).reshape(-1).astype(bool)
    a = np.asarray(a).reshape(-1).astype(bool)
    return {
        "a0": int((~a).sum()),
        "a1": int(a.sum()),
        "a0_y0": int((~a & ~y).sum()),
        "a1_y0": int((a & ~y).sum()),
        "a0_y1": int((~a & y).sum()),
        "a1_y1": int((a & y).sum()),
    }


def evaluate(y_hat, y, a) -> EvalReport:
    y_arr = np.asarray(y).reshape(-1)
    return EvalReport(
        balanced_accuracy=balanced_accuracy(y_hat, y_arr),
        delta_dp=delta_dp(y_hat, a),
        delta_eo=delta_eo(y_hat, y_arr, a),
        delta_ao=delta_ao(y_hat, y_arr, a),
        group_counts=group_counts(y_arr, a),
        single_class=bool(np.all(y_arr == y_arr[0])),
        degenerate=is_degenerate(y_hat),
    )


def write_reports_csv(path, rows: list[tuple[str, EvalReport]]) -> None:
    """Write ``(label, report)`` pairs to a CSV file."""
    flat = [{"label": label, **rep.row()} for label, rep in rows]
    fields = list(flat[0].keys()) if flat else ["label"]
    with open(path, "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=fields, lineterminator="\n")
        w.writeheader()
        w.writerows(flat)
