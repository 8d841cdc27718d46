"""Column encodings: standardization, one-hot, and 0/1 coding of label and sensitive attribute."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field, replace
from typing import Callable

import numpy as np
import pandas as pd

from ..errors import SchemaError
from .raw import GERMAN_COLUMNS, RawTable

log = logging.getLogger(__name__)

NUMERIC = "numeric"
ONE_HOT = "one-hot"
DROP = "drop"
SENSITIVE = "sensitive"
LABEL = "label"
KINDS = (NUMERIC, ONE_HOT, DROP, SENSITIVE, LABEL)


@dataclass
class FeatureSpec:
    """Per-column encoding plus statistics fitted on the source training rows.

    ``label_positive`` lists raw values coded y=1; ``sensitive_privileged``
    lists raw values coded a=1. Everything else is coded 0.
    """

    kinds: dict[str, str]
    label_positive: frozenset[str]
    sensitive_privileged: frozenset[str]
    means: dict[str, float] = field(default_factory=dict)
    stds: dict[str, float] = field(default_factory=dict)
    vocab: dict[str, list[str]] = field(default_factory=dict)
    warnings: list[str] = field(default_factory=list)

    def __post_init__(self):
        bad = {k: v for k, v in self.kinds.items() if v not in KINDS}
        if bad:
            raise SchemaError(f"unknown encodings {bad}")
        for kind in (LABEL, SENSITIVE):
            n = sum(1 for v in self.kinds.values() if v == kind)
            if n != 1:
                raise SchemaError(f"exactly one {kind} column required, found {n}")

    @property
    def label_column(self) -> str:
        return next(c for c, k in self.kinds.items() if k == LABEL)

    @property
    def sensitive_column(self) -> str:
        return next(c for c, k in self.kinds.items() if k == SENSITIVE)

    def dropping(self, columns) -> FeatureSpec:
        kinds = dict(self.kinds)
        for c in columns:
            if kinds.get(c) in (LABEL, SENSITIVE):
                raise SchemaError(f"cannot drop the {kinds[c]} column {c!r}")
            kinds[c] = DROP
        return replace(self, kinds=kinds, means={}, stds={}, vocab={}, warnings=[])

    def feature_names(self) -> list[str]:
        names = []
        for col, kind in self.kinds.items():
            if kind == NUMERIC:
                names.append(col)
            elif kind == ONE_HOT:
                names.extend(f"{col}={v}" for v in self.vocab[col])
        return names


def default_spec(dataset: str) -> FeatureSpec:
    """Encoding conventions used for the three datasets."""
    if dataset == "adult":
        kinds = {
            "age": NUMERIC, "workclass": ONE_HOT, "fnlwgt": DROP,
            # categorical duplicate of education-num
            "education": DROP,
            "education-num": NUMERIC, "marital-status": ONE_HOT,
            "occupation": ONE_HOT, "relationship": ONE_HOT, "race": ONE_HOT,
            "sex": SENSITIVE, "capital-gain": NUMERIC, "capital-loss": NUMERIC,
            "hours-per-week": NUMERIC, "native-country": ONE_HOT, "income": LABEL,
        }
        return FeatureSpec(kinds, frozenset({">50K"}), frozenset({"Male"}))
    if dataset == "german":
        numeric = {
            "duration", "credit_amount", "installment_rate",
            "present_residence_since", "age", "number_of_existing_credits",
            "number_of_people_liable_for",
        }
        kinds = {c: NUMERIC if c in numeric else ONE_HOT for c in GERMAN_COLUMNS}
        kinds["status_sex"] = SENSITIVE
        kinds["credit"] = LABEL
        # A91/A93/A94 are the male personal-status codes; "2" is a bad credit risk
        return FeatureSpec(kinds, frozenset({"2"}), frozenset({"A91", "A93", "A94"}))
    if dataset == "compas":
        kinds = {
            "sex": SENSITIVE, "age": NUMERIC, "race": ONE_HOT,
            "juv_fel_count": NUMERIC, "juv_misd_count": NUMERIC,
            "juv_other_count": NUMERIC, "priors_count": NUMERIC,
            "c_charge_degree": ONE_HOT, "days_b_screening_arrest": DROP,
            "is_recid": DROP, "score_text": DROP, "two_year_recid": LABEL,
        }
        return FeatureSpec(kinds, frozenset({"1"}), frozenset({"Female"}))
    raise ValueError(f"unknown dataset {dataset!r}")


Encoder = Callable[[pd.DataFrame], tuple[np.ndarray, np.ndarray, np.ndarray]]


def fit_encode(table: RawTable, spec: FeatureSpec, fit_rows) -> tuple[FeatureSpec, Encoder]:
    """Fit standardization and vocabularies on ``fit_rows`` of ``table``.

    Returns the fitted spec and an encoder mapping any frame with the same
    columns to ``(X, a, y)``.
    """
    missing = [c for c in table.columns if c not in spec.kinds]
    if missing:
        raise SchemaError(f"feature spec does not cover columns {missing}")
    fit = table.frame.iloc[np.asarray(fit_rows)]
    fitted = replace(spec, means={}, stds={}, vocab={}, warnings=[])
    for col, kind in spec.kinds.items():
        if kind == NUMERIC:
            values = pd.to_numeric(fit[col]).to_numpy(dtype=np.float64)
            mu = float(values.mean())
            sd = float(values.std())
            if sd == 0.0:
                msg = f"column {col!r} has zero variance on the fit rows; encoded as 0"
                log.warning(msg)
                fitted.warnings.append(msg)
            fitted.means[col] = mu
            fitted.stds[col] = sd
        elif kind == ONE_HOT:
            fitted.vocab[col] = sorted(fit[col].unique().tolist())

    def encoder(frame: pd.DataFrame):
        return transform(fitted, frame)

    return fitted, encoder


def transform(spec: FeatureSpec, frame: pd.DataFrame):
    blocks = []
    for col, kind in spec.kinds.items():
        if kind == NUMERIC:
            values = pd.to_numeric(frame[col]).to_numpy(dtype=np.float64)
            sd = spec.stds[col]
            if sd == 0.0:
                blocks.append(np.zeros((len(frame), 1)))
            else:
                blocks.append(((values - spec.means[col]) / sd)[:, None])
        elif kind == ONE_HOT:
            vocab = spec.vocab[col]
            # unseen categories map to -1 and thus to an all-zero code
            codes = pd.Categorical(frame[col], categories=vocab).codes
            onehot = np.zeros((len(frame), len(vocab)))
            seen = codes >= 0
            onehot[np.nonzero(seen)[0], codes[seen]] = 1.0
            blocks.append(onehot)
    X = np.hstack(blocks) if blocks else np.zeros((len(frame), 0))
    a = frame[spec.sensitive_column].isin(spec.sensitive_privileged).to_numpy(np.int8)
    y = frame[spec.label_column].isin(spec.label_positive).to_numpy(np.int8)
    return X, a, y
