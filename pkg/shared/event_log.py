"""Append-only JSONL log of ``qsp`` run events.

Each line is a self-contained JSON object with at least::

    {"seq": 1, "ts": "2026-...", "type": "check_done", ...}

Only the types in :class:`EventType` are accepted.  A run emits
``run_start``, then ``family_built`` (or a ``warning`` carrying the
construction finding), one ``check_done`` per verification sweep, any
further ``warning`` and ``file_written`` events, and finally ``run_end``.
"""

from __future__ import annotations

import json
import os
import threading
from enum import Enum
from typing import Any, Mapping

from shared.run_context import utc_now_iso


class EventType(str, Enum):
    RUN_START = "run_start"
    FAMILY_BUILT = "family_built"
    CHECK_DONE = "check_done"
    WARNING = "warning"
    FILE_WRITTEN = "file_written"
    RUN_END = "run_end"


class EventLog:
    """Thread-safe event writer.

    With ``path=None`` events are sequenced and returned but not written,
    so callers never need to test whether logging was requested.
    """

    def __init__(self, path: str | None) -> None:
        self._path = path
        self._lock = threading.Lock()
        self._seq = 0
        self._fh = None
        if path is not None:
            os.makedirs(os.path.dirname(path) or ".", exist_ok=True)
            self._fh = open(path, "a", encoding="utf-8")  # noqa: SIM115

    def __enter__(self) -> "EventLog":
        return self

    def __exit__(self, *exc: object) -> None:
        self.close()

    @property
    def path(self) -> str | None:
        return self._path

    def emit(self, event_type: EventType | str, **data: Any) -> dict[str, Any]:
        """Append one event and return it; unknown types raise ``ValueError``."""
        kind = EventType(event_type)
        with self._lock:
            self._seq += 1
            event: dict[str, Any] = {"seq": self._seq, "ts": utc_now_iso(), "type": kind.value, **data}
            if self._fh is not None:
                self._fh.write(json.dumps(event, separators=(",", ":"), default=str) + "\n")
                self._fh.flush()
            return event

    # -- typed helpers -------------------------------------------------------

    def run_start(self, command: str, family: str, config_sha256: str) -> dict[str, Any]:
        return self.emit(EventType.RUN_START, command=command, family=family, config_sha256=config_sha256)

    def family_built(self, description: Mapping[str, Any]) -> dict[str, Any]:
        """``description`` is the family's ``describe()`` mapping."""
        return self.emit(EventType.FAMILY_BUILT, **description)

    def check_done(self, report: Mapping[str, Any]) -> dict[str, Any]:
        """``report`` is a verification report's ``to_dict()``."""
        return self.emit(EventType.CHECK_DONE, **report)

    def warning(self, finding: Mapping[str, Any]) -> dict[str, Any]:
        """``finding`` carries ``code``, ``condition``, ``message`` and ``point``."""
        if "code" not in finding:
            raise ValueError("a warning event needs a finding code")
        return self.emit(EventType.WARNING, **finding)

    def file_written(self, kind: str, path: str) -> dict[str, Any]:
        return self.emit(EventType.FILE_WRITTEN, kind=kind, path=path)

    def run_end(self, command: str, exit_code: int) -> dict[str, Any]:
        return self.emit(EventType.RUN_END, command=command, exit_code=exit_code)

    def close(self) -> None:
        with self._lock:
            if self._fh is not None and not self._fh.closed:
                self._fh.close()
