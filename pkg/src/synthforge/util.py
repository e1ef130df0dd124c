"""Small shared helpers: identifiers, clocks, hashing, JSON file IO."""

from __future__ import annotations

import dataclasses
import hashlib
import json
import re
import time
from datetime import datetime, timedelta, timezone
from pathlib import Path
from typing import Any

IDENTIFIER_RE = re.compile(r"^[A-Za-z_][A-Za-z0-9_]*$")

_EPOCH = datetime(2024, 1, 1, tzinfo=timezone.utc)


def is_identifier(text: str) -> bool:
    """True when text is a C-style identifier: letter or underscore first."""
    return bool(IDENTIFIER_RE.match(text))


class Clock:
    """Wall-clock time source; subclass to make timestamps reproducible."""

    def now(self) -> datetime:
        return datetime.now(timezone.utc)

    def timestamp(self) -> str:
        return self.now().strftime("%Y-%m-%dT%H:%M:%SZ")

    def monotonic(self) -> float:
        return time.monotonic()


class DeterministicClock(Clock):
    """Counts up one second per reading from a fixed origin.

    Used whenever completions come from a scripted or replayed backend so
    emitted files are byte-identical across runs.
    """

    def __init__(self) -> None:
        self._ticks = 0

    def now(self) -> datetime:
        stamp = _EPOCH + timedelta(seconds=self._ticks)
        self._ticks += 1
        return stamp

    def monotonic(self) -> float:
        self._ticks += 1
        return float(self._ticks)


def sha256_hex(data: bytes | str) -> str:
    if isinstance(data, str):
        data = data.encode("utf-8")
    return hashlib.sha256(data).hexdigest()


def canonical_json(payload: Any) -> str:
    """Stable JSON text: sorted keys, no trailing spaces, LF only."""
    return json.dumps(payload, sort_keys=True, ensure_ascii=False, indent=2) + "\n"


def write_json(path: Path, payload: Any) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(canonical_json(payload), encoding="utf-8")


def read_json(path: Path) -> Any:
    return json.loads(path.read_text(encoding="utf-8"))


def write_text(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(text, encoding="utf-8")


def as_plain(value: Any) -> Any:
    """Recursively convert dataclasses, paths, and tuples to JSON-safe types."""
    if dataclasses.is_dataclass(value) and not isinstance(value, type):
        return {
            field.name: as_plain(getattr(value, field.name))
            for field in dataclasses.fields(value)
        }
    if isinstance(value, dict):
        return {str(key): as_plain(item) for key, item in value.items()}
    if isinstance(value, (list, tuple)):
        return [as_plain(item) for item in value]
    if isinstance(value, Path):
        return str(value)
    if isinstance(value, datetime):
        return value.strftime("%Y-%m-%dT%H:%M:%SZ")
    return value


def truncate_output(text: str, limit: int = 65536) -> str:
    """Clamp captured process output, appending a marker when cut."""
    if len(text) <= limit:
        return text
    return text[:limit] + "\n[output truncated]"
