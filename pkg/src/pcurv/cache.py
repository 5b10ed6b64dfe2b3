"""Content-addressed store of result records.

A record lives at ``<root>/<key[:2]>/<key>.json``.  The key hashes the
canonical operator bytes, the command, its effective parameters and the
toolkit version; the record also carries a hash of its payload so that a
damaged file is detected on read.
"""

from __future__ import annotations

import hashlib
import json
import os
import tempfile
import time
from dataclasses import dataclass
from pathlib import Path
from typing import Any

from . import __version__
from .errors import CacheCorrupt


def _canonical(obj: Any) -> bytes:
    return json.dumps(obj, sort_keys=True, separators=(",", ":")).encode()


def record_key(operator: bytes, command: str, params: dict, version: str | None = None) -> str:
    h = hashlib.sha256()
    h.update(_canonical({"command": command, "params": params, "version": version or __version__}))
    h.update(b"\0")
    h.update(operator)
    return h.hexdigest()


@dataclass(frozen=True)
class ResultRecord:
    key: str
    command: str
    version: str
    exit_code: int
    payload: dict
    created: float

    def payload_hash(self) -> str:
        return hashlib.sha256(_canonical(self.payload)).hexdigest()

    def to_json(self) -> dict:
        return {"key": self.key, "command": self.command, "version": self.version, "exit_code": self.exit_code,
                "payload": self.payload, "payload_sha256": self.payload_hash(), "created": self.created}

    @classmethod
    def from_json(cls, doc: dict) -> ResultRecord:
        try:
            rec = cls(doc["key"], doc["command"], doc["version"], doc["exit_code"], doc["payload"], doc["created"])
            stored = doc["payload_sha256"]
        except (KeyError, TypeError) as exc:
            raise CacheCorrupt(f"record is missing {exc}") from None
        if rec.payload_hash() != stored:
            raise CacheCorrupt("payload hash mismatch")
        return rec


def default_cache_dir() -> Path:
    env = os.environ.get("PCURV_CACHE")
    if env:
        return Path(env)
    return Path(os.environ.get("XDG_CACHE_HOME", Path.home() / ".cache")) / "pcurv"


@dataclass
class Lookup:
    record: ResultRecord | None
    version_mismatch: bool = False

    @property
    def hit(self) -> bool:
        return self.record is not None


class ResultCache:
    def __init__(self, root: Path | str | None = None):
        self.root = Path(root) if root is not None else default_cache_dir()

    def path(self, key: str) -> Path:
        return self.root / key[:2] / f"{key}.json"

    def lookup(self, key: str) -> Lookup:
        """Raises CacheCorrupt if the stored file is damaged."""
        p = self.path(key)
        if not p.exists():
            return Lookup(None)
        try:
            doc = json.loads(p.read_text())
        except (json.JSONDecodeError, UnicodeDecodeError) as exc:
            raise CacheCorrupt(f"unreadable record {p.name}: {exc}") from None
        if not isinstance(doc, dict):
            raise CacheCorrupt(f"record {p.name} is not an object")
        rec = ResultRecord.from_json(doc)
        if rec.key != key:
            raise CacheCorrupt("record key does not match its address")
        if rec.version != __version__:
            return Lookup(None, version_mismatch=True)
        return Lookup(rec)

    def store(self, key: str, command: str, exit_code: int, payload: dict) -> ResultRecord:
        rec = ResultRecord(key, command, __version__, exit_code, payload, time.time())
        p = self.path(key)
        p.parent.mkdir(parents=True, exist_ok=True)
        fd, tmp = tempfile.mkstemp(dir=p.parent, prefix=".tmp-", suffix=".json")
        try:
            with os.fdopen(fd, "w") as fh:
                json.dump(rec.to_json(), fh, sort_keys=True, indent=1)
            os.replace(tmp, p)
        except BaseException:
            Path(tmp).unlink(missing_ok=True)
            raise
        return rec
