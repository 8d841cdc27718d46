import json
import shutil
import urllib.error

import pytest

from fairadapt.datasets import fetch
from fairadapt.errors import FetchError


@pytest.fixture
def local_web(data_dir, monkeypatch):
    """Serve the original URLs from the already-verified local copies."""
    by_url = {meta["url"]: (data_dir / name).read_bytes() for name, meta in fetch.SOURCES.items()}
    calls = []

    def fake_get(url, timeout):
        calls.append(url)
        if url not in by_url:
            raise urllib.error.URLError("offline")
        return by_url[url]

    monkeypatch.setattr(fetch, "_get", fake_get)
    return calls


def test_fresh_directory_gets_files_and_manifest(tmp_path, local_web):
    manifest = fetch.fetch_datasets(tmp_path)
    for name in fetch.SOURCES:
        assert (tmp_path / name).exists()
    on_disk = json.loads((tmp_path / "manifest.json").read_text())
    assert on_disk == manifest
    assert manifest["files"]["german.data"]["records"] == 1000
    assert len(local_web) == 4


def test_rerun_does_not_download_again(tmp_path, local_web):
    fetch.fetch_datasets(tmp_path)
    local_web.clear()
    fetch.fetch_datasets(tmp_path)
    assert local_web == []


def test_corrupt_file_is_replaced(tmp_path, local_web):
    fetch.fetch_datasets(tmp_path)
    (tmp_path / "german.data").write_text("garbage\n")
    local_web.clear()
    fetch.fetch_datasets(tmp_path)
    assert local_web == [fetch.SOURCES["german.data"]["url"]]


def test_offline_verification_of_existing_copies(tmp_path, data_dir):
    for name in fetch.SOURCES:
        shutil.copy(data_dir / name, tmp_path / name)
    manifest = fetch.fetch_datasets(tmp_path, offline=True)
    assert set(manifest["files"]) == set(fetch.SOURCES)


def test_missing_files_offline_give_manual_instructions(tmp_path):
    with pytest.raises(FetchError, match="by hand"):
        fetch.fetch_datasets(tmp_path, offline=True)


def test_unreachable_hosts_give_manual_instructions(tmp_path, monkeypatch):
    def refuse(url, timeout):
        raise urllib.error.URLError("no route")

    monkeypatch.setattr(fetch, "_get", refuse)
    with pytest.raises(FetchError, match="by hand"):
        fetch.fetch_datasets(tmp_path)


def test_record_counting():
    assert fetch.count_records("adult.test", b"|header\n1,2\n3,4\n\n") == 2
    assert fetch.count_records("x.csv", b"h\n1\n2\n") == 2
