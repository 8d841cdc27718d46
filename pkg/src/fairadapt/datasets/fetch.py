"""Download the three datasets, verify them, and write a provenance manifest.

Each file is tried at its original URL first. If that host is unreachable
the files are taken from the ``responsibly`` wheel on PyPI, which ships
byte-identical copies; the SHA-256 pins below hold for both routes.
"""

from __future__ import annotations

import hashlib
import io
import json
import logging
import re
import urllib.error
import urllib.parse
import urllib.request
import zipfile
from pathlib import Path

from ..errors import FetchError

log = logging.getLogger(__name__)

MANIFEST = "manifest.json"

UCI = "https://archive.ics.uci.edu/ml/machine-learning-databases"

SOURCES = {
    "adult.data": {
        "url": f"{UCI}/adult/adult.data",
        "sha256": "5b00264637dbfec36bdeaab5676b0b309ff9eb788d63554ca0a249491c86603d",
        "records": 32561,
        "wheel_member": "responsibly/dataset/adult/adult.data",
    },
    "adult.test": {
        "url": f"{UCI}/adult/adult.test",
        "sha256": "a2a9044bc167a35b2361efbabec64e89d69ce82d9790d2980119aac5fd7e9c05",
        "records": 16281,
        "wheel_member": "responsibly/dataset/adult/adult.test",
    },
    "german.data": {
        "url": f"{UCI}/statlog/german/german.data",
        "sha256": "b21f3d81db8071257d5ff1deaeba1fd4303b62712e6fcc9715c7a86202cb5871",
        "records": 1000,
        "wheel_member": "responsibly/dataset/german/german.data",
    },
    "compas-scores-two-years.csv": {
        "url": "https://raw.githubusercontent.com/propublica/compas-analysis/master/compas-scores-two-years.csv",
        "sha256": "c451db85908b2f7fef1d83203bedf6b71ecda0d5af468d82ae62178f91d0cc7d",
        "records": 7214,
        "wheel_member": "responsibly/dataset/compas/compas-scores-two-years.csv",
    },
}

WHEEL_INDEX = "https://pypi.org/simple/responsibly/"
WHEEL_NAME = "responsibly-0.1.2-py3-none-any.whl"
WHEEL_SHA256 = "38cd0f88de722d2276bc106910588e56feb1037dcf2a526fb0fec510f66d190b"

MANUAL_HELP = (
    "Download these files by hand into {data_dir}:\n"
    + "\n".join(f"  {name}: {meta['url']}" for name, meta in SOURCES.items())
    + "\nthen rerun `fairadapt fetch` to verify them."
)


def sha256(data: bytes) -> str:
    return hashlib.sha256(data).hexdigest()


def count_records(name: str, data: bytes) -> int:
    lines = [l for l in data.decode("utf-8", "replace").splitlines() if l.strip()]
    if name == "adult.test":
        lines = [l for l in lines if not l.startswith("|")]
    if name.endswith(".csv"):
        lines = lines[1:]
    return len(lines)


def _get(url: str, timeout: float) -> bytes:
    with urllib.request.urlopen(url, timeout=timeout) as resp:
        return resp.read()


def _wheel_bytes(timeout: float) -> bytes:
    index = _get(WHEEL_INDEX, timeout).decode()
    m = re.search(r'href="([^"]*' + re.escape(WHEEL_NAME) + r'[^"]*)"', index)
    if not m:
        raise FetchError(f"{WHEEL_NAME} not listed at {WHEEL_INDEX}")
    url = urllib.parse.urljoin(WHEEL_INDEX, m.group(1).split("#")[0])
    data = _get(url, timeout)
    if sha256(data) != WHEEL_SHA256:
        raise FetchError(f"checksum mismatch for {url}")
    return data


def _verify(name: str, data: bytes) -> None:
    meta = SOURCES[name]
    digest = sha256(data)
    if digest != meta["sha256"]:
        raise FetchError(f"{name}: sha256 {digest} does not match {meta['sha256']}")
    rows = count_records(name, data)
    if rows != meta["records"]:
        raise FetchError(f"{name}: {rows} records, expected {meta['records']}")


def _is_current(path: Path, name: str) -> bool:
    if not path.exists():
        return False
    return sha256(path.read_bytes()) == SOURCES[name]["sha256"]


def fetch_datasets(data_dir, timeout: float = 300.0, offline: bool = False) -> dict:
    """Make sure every source file is present and verified under ``data_dir``.

    Files whose checksum already matches are left untouched. Returns the
    manifest that is also written to ``data_dir/manifest.json``.
    """
    data_dir = Path(data_dir)
    data_dir.mkdir(parents=True, exist_ok=True)
    manifest_path = data_dir / MANIFEST
    previous = {}
    if manifest_path.exists():
        previous = json.loads(manifest_path.read_text()).get("files", {})

    files = {}
    wheel = None
    for name, meta in SOURCES.items():
        path = data_dir / name
        if _is_current(path, name):
            files[name] = previous.get(name) or {"origin": "local"}
            files[name].update(sha256=meta["sha256"], records=meta["records"])
            continue
        if offline:
            raise FetchError(f"{path} missing or corrupt.\n" + MANUAL_HELP.format(data_dir=data_dir))
        try:
            data = _get(meta["url"], timeout)
            _verify(name, data)
            origin = meta["url"]
        except (urllib.error.URLError, OSError, FetchError) as exc:
            log.info("%s unavailable (%s); trying the PyPI wheel", meta["url"], exc)
            try:
                if wheel is None:
                    wheel = zipfile.ZipFile(io.BytesIO(_wheel_bytes(timeout)))
                data = wheel.read(meta["wheel_member"])
                _verify(name, data)
            except (urllib.error.URLError, OSError, FetchError, KeyError) as exc2:
                raise FetchError(
                    f"could not download {name}: {exc2}\n"
                    + MANUAL_HELP.format(data_dir=data_dir)
                ) from exc2
            origin = f"pypi:{WHEEL_NAME}!{meta['wheel_member']} (mirror of {meta['url']})"
        path.write_bytes(data)
        files[name] = {"origin": origin, "sha256": meta["sha256"], "records": meta["records"]}
        log.info("wrote %s", path)

    manifest = {"files": files}
    manifest_path.write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    return manifest
