"""Checksummed single-file container used for dataset caches and model bundles.

Layout: a zip holding ``manifest.json`` plus content-addressed binary blobs.
Every blob is listed in the manifest with its sha256, so any byte flip is
detected at load. Writes go to a temp file and are atomically renamed, and
all zip metadata is pinned so identical content yields identical bytes.
"""

from __future__ import annotations

import hashlib
import io
import json
import os
import zipfile
from typing import Any

import numpy as np

MANIFEST_NAME = "manifest.json"
_ZIP_EPOCH = (1980, 1, 1, 0, 0, 0)


class ArchiveError(Exception):
    """Raised for unreadable, corrupted or unsupported archives."""


class ArchiveWriter:
    """Collects JSON-able metadata plus binary blobs, then writes one file."""

    def __init__(self, format_version: str) -> None:
        self.format_version = format_version
        self._blobs: dict[str, bytes] = {}

    def add_blob(self, data: bytes) -> str:
        """Store raw bytes, returning a content-addressed entry name."""
        digest = hashlib.sha256(data).hexdigest()
        name = f"blob/{digest[:24]}"
        self._blobs[name] = data
        return name

    def add_array(self, arr: np.ndarray) -> str:
        buf = io.BytesIO()
        np.save(buf, np.ascontiguousarray(arr), allow_pickle=False)
        return self.add_blob(buf.getvalue())

    def add_json(self, obj: Any) -> str:
        return self.add_blob(
            json.dumps(obj, sort_keys=True, separators=(",", ":")).encode()
        )

    def write(self, path: str | os.PathLike, metadata: dict[str, Any]) -> None:
        manifest = {
            "format_version": self.format_version,
            "metadata": metadata,
            "entries": {
                name: hashlib.sha256(data).hexdigest()
                for name, data in self._blobs.items()
            },
        }
        payload = json.dumps(manifest, sort_keys=True, indent=1).encode()
        tmp = f"{os.fspath(path)}.tmp.{os.getpid()}"
        try:
            with zipfile.ZipFile(tmp, "w", compression=zipfile.ZIP_STORED) as zf:
                zf.writestr(_pinned_info(MANIFEST_NAME), payload)
                for name in sorted(self._blobs):
                    zf.writestr(_pinned_info(name), self._blobs[name])
            os.replace(tmp, path)
        finally:
            if os.path.exists(tmp):
                os.unlink(tmp)


def _pinned_info(name: str) -> zipfile.ZipInfo:
    info = zipfile.ZipInfo(name, date_time=_ZIP_EPOCH)
    info.compress_type = zipfile.ZIP_STORED
    info.external_attr = 0o600 << 16
    return info


class ArchiveReader:
    """Reads a container, verifying version and per-entry checksums."""

    def __init__(self, path: str | os.PathLike, expected_version: str) -> None:
        try:
            with zipfile.ZipFile(path, "r") as zf:
                manifest = json.loads(zf.read(MANIFEST_NAME))
                self._entries = {
                    name: zf.read(name) for name in manifest.get("entries", {})
                }
        except (zipfile.BadZipFile, KeyError, json.JSONDecodeError, OSError) as exc:
            raise ArchiveError(f"cannot read archive {path}: {exc}") from exc
        version = manifest.get("format_version")
        if version != expected_version:
            raise ArchiveError(
                f"unsupported archive format_version {version!r}; "
                f"this build reads version {expected_version!r}"
            )
        for name, digest in manifest["entries"].items():
            if hashlib.sha256(self._entries[name]).hexdigest() != digest:
                raise ArchiveError(f"checksum mismatch for entry {name!r}")
        self.metadata: dict[str, Any] = manifest["metadata"]

    def blob(self, name: str) -> bytes:
        try:
            return self._entries[name]
        except KeyError as exc:
            raise ArchiveError(f"missing archive entry {name!r}") from exc

    def array(self, name: str) -> np.ndarray:
        return np.load(io.BytesIO(self.blob(name)), allow_pickle=False)

    def json(self, name: str) -> Any:
        return json.loads(self.blob(name))
