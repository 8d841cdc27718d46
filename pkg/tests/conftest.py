import os
from pathlib import Path

import pytest

from fairadapt.datasets import fetch_datasets, load_dataset
from fairadapt.errors import FetchError

DATA_DIR = Path(os.environ.get("FAIRADAPT_DATA_DIR", Path(__file__).resolve().parents[1] / "data"))


@pytest.fixture(scope="session")
def data_dir() -> Path:
    try:
        fetch_datasets(DATA_DIR)
    except FetchError as exc:
        pytest.skip(f"datasets unavailable: {exc}")
    return DATA_DIR


@pytest.fixture(scope="session")
def tables(data_dir):
    return {name: load_dataset(name, data_dir) for name in ("adult", "compas", "german")}


ACCEPTANCE_LINES: list[str] = []


@pytest.fixture(scope="session")
def verdict():
    """Record one PASS/FAIL line per checked criterion and return the outcome."""

    def record(label: str, ok: bool, detail: str) -> bool:
        ACCEPTANCE_LINES.append(f"{'PASS' if ok else 'FAIL'}  {label}: {detail}")
        return ok

    return record


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
