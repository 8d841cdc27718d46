"""Parsing of the Adult, German credit and COMPAS source files."""

from __future__ import annotations

import csv
import os
from dataclasses import dataclass
from pathlib import Path

import pandas as pd

from ..errors import SchemaError

DATASET_IDS = ("adult", "german", "compas")

ADULT_COLUMNS = [
    "age", "workclass", "fnlwgt", "education", "education-num",
    "marital-status", "occupation", "relationship", "race", "sex",
    "capital-gain", "capital-loss", "hours-per-week", "native-country",
    "income",
]

GERMAN_COLUMNS = [
    "status", "duration", "credit_history", "purpose", "credit_amount",
    "savings", "present_employment", "installment_rate", "status_sex",
    "other_debtors", "present_residence_since", "property", "age",
    "installment_plans", "housing", "number_of_existing_credits", "job",
    "number_of_people_liable_for", "telephone", "foreign_worker", "credit",
]

# columns of compas-scores-two-years.csv that the pipeline touches
COMPAS_COLUMNS = [
    "sex", "age", "race", "juv_fel_count", "juv_misd_count",
    "juv_other_count", "priors_count", "c_charge_degree",
    "days_b_screening_arrest", "is_recid", "score_text", "two_year_recid",
]

FILES = {
    "adult": ("adult.data", "adult.test"),
    "german": ("german.data",),
    "compas": ("compas-scores-two-years.csv",),
}

MISSING = "?"


@dataclass(frozen=True)
class RawTable:
    """String-valued table of one dataset, one record per row."""

    dataset: str
    frame: pd.DataFrame

    @property
    def columns(self) -> list[str]:
        return list(self.frame.columns)

    def __len__(self) -> int:
        return len(self.frame)

    def numeric(self, column: str) -> pd.Series:
        return pd.to_numeric(self.frame[column])

    def subset(self, mask) -> RawTable:
        return RawTable(self.dataset, self.frame[mask].reset_index(drop=True))


def _resolve(dataset: str, path) -> list[Path]:
    path = Path(path)
    if path.is_dir():
        files = [path / name for name in FILES[dataset]]
    else:
        files = [path]
    for f in files:
        if not f.exists():
            raise FileNotFoundError(f"{dataset}: no such file {os.fspath(f)}")
    return files


def _read_whitespace_records(path: Path, sep: str, n_fields: int, dataset: str):
    rows = []
    with open(path, newline="") as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.strip()
            if not line or line.startswith("|"):
                continue
            fields = [f.strip() for f in line.split(sep)]
            if len(fields) != n_fields:
                expected = ADULT_COLUMNS if dataset == "adult" else GERMAN_COLUMNS
                raise SchemaError(
                    f"{path}:{lineno}: expected {n_fields} fields "
                    f"({', '.join(expected)}), found {len(fields)}"
                )
            rows.append(fields)
    return rows


def _load_adult(files: list[Path], drop_missing: bool) -> pd.DataFrame:
    rows = []
    for f in files:
        rows.extend(_read_whitespace_records(f, ",", len(ADULT_COLUMNS), "adult"))
    frame = pd.DataFrame(rows, columns=ADULT_COLUMNS, dtype=str)
    # adult.test spells the labels "<=50K." / ">50K."
    frame["income"] = frame["income"].str.rstrip(".")
    if drop_missing:
        frame = frame[~(frame == MISSING).any(axis=1)]
    return frame.reset_index(drop=True)


def _load_german(files: list[Path]) -> pd.DataFrame:
    rows = []
    for f in files:
        rows.extend(_read_whitespace_records(f, " ", len(GERMAN_COLUMNS), "german"))
    return pd.DataFrame(rows, columns=GERMAN_COLUMNS, dtype=str)


def compas_filter(frame: pd.DataFrame) -> pd.Series:
    """ProPublica screening filter, restricted to African-American and Caucasian defendants."""
    days = pd.to_numeric(frame["days_b_screening_arrest"], errors="coerce")
    return (
        days.between(-30, 30)
        & (frame["is_recid"] != "-1")
        & (frame["c_charge_degree"] != "O")
        & (frame["score_text"] != "N/A")
        & frame["race"].isin(["African-American", "Caucasian"])
    )


def _load_compas(files: list[Path]) -> pd.DataFrame:
    with open(files[0], newline="") as fh:
        header = next(csv.reader(fh))
    missing = [c for c in COMPAS_COLUMNS if c not in header]
    if missing:
        raise SchemaError(
            f"{files[0]}: missing columns {missing}; expected at least "
            f"{', '.join(COMPAS_COLUMNS)}"
        )
    frame = pd.read_csv(
        files[0], dtype=str, keep_default_na=False, usecols=COMPAS_COLUMNS
    )[COMPAS_COLUMNS]
    return frame[compas_filter(frame)].reset_index(drop=True)


def load_dataset(dataset: str, path, drop_missing: bool = False) -> RawTable:
    """Read one dataset into a :class:`RawTable`.

    ``path`` is either the data directory holding the standard file names
    (``adult.data``/``adult.test``, ``german.data``,
    ``compas-scores-two-years.csv``) or a single file. Adult train and test
    files are concatenated. ``drop_missing`` removes Adult records containing
    ``"?"``; by default they are kept and ``"?"`` acts as an ordinary
    category. COMPAS records go through :func:`compas_filter`.
    """
    if dataset not in DATASET_IDS:
        raise ValueError(f"unknown dataset {dataset!r}; expected one of {DATASET_IDS}")
    files = _resolve(dataset, path)
    if dataset == "adult":
        frame = _load_adult(files, drop_missing)
    elif dataset == "german":
        frame = _load_german(files)
    else:
        frame = _load_compas(files)
    return RawTable(dataset, frame)
