"""Hashing and atomic file output shared by the library and the CLI.

Provides:
- canonical JSON bytes and SHA-256 hashing (config fingerprints)
- atomic JSON / text writes (temp file, fsync, replace)
- UTC timestamps for the event log (never written into reports)
"""

from __future__ import annotations

import hashlib
import json
import os
import tempfile
from datetime import datetime, timezone
from typing import Any

# ---------------------------------------------------------------------------
# Timestamps
# ---------------------------------------------------------------------------


def utc_now_iso() -> str:
    """Return current UTC time as ISO-8601 string with microseconds."""
    return datetime.now(timezone.utc).strftime("%Y-%m-%dT%H:%M:%S.%fZ")


# ---------------------------------------------------------------------------
# Hashing
# ---------------------------------------------------------------------------


def canonical_json_bytes(obj: Any) -> bytes:
    """Sorted keys, minimal separators, UTF-8."""
    return json.dumps(obj, sort_keys=True, separators=(",", ":"), ensure_ascii=False).encode("utf-8")


def sha256_bytes(data: bytes) -> str:
    """Return hex SHA-256 of raw bytes."""
    return hashlib.sha256(data).hexdigest()


def sha256_json(obj: Any) -> str:
    """Return hex SHA-256 of canonical JSON."""
    return sha256_bytes(canonical_json_bytes(obj))


# ---------------------------------------------------------------------------
# Atomic writes
# ---------------------------------------------------------------------------


def write_text_atomic(path: str, text: str) -> str:
    """Write *text* to *path* atomically; a trailing newline is ensured.

    Returns *path*.
    """
    if not text.endswith("\n"):
        text += "\n"
    parent = os.path.dirname(path) or "."
    os.makedirs(parent, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=parent, suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
            fh.flush()
            os.fsync(fh.fileno())
        os.replace(tmp, path)
    except BaseException:
        try:
            os.unlink(tmp)
        except OSError:
            pass
        raise
    return path


def dumps_report(data: Any) -> str:
    """Sorted keys, two-space indent, trailing newline."""
    return json.dumps(data, indent=2, sort_keys=True, ensure_ascii=False) + "\n"


def write_json_atomic(path: str, data: Any) -> str:
    """Atomic JSON write in the :func:`dumps_report` layout."""
    return write_text_atomic(path, dumps_report(data))
