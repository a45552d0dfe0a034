"""Durable key-value store backing sessions, VO groups, ACLs and user maps.

FileKvStore is a single-writer, multi-reader store: an in-memory map plus an
append-only write-ahead log.  Every record is one line

    1 <TAB> put|del <TAB> base64(key) [<TAB> base64(value)]

where the leading "1" is the format version tag.  A put is acknowledged only
after the line is flushed (and fsynced) to disk, so an acknowledged write
survives process termination; a torn final line from a crash mid-write is
dropped on replay, leaving the prior value intact.

Key schema used by the rest of the package (part of the on-disk contract):
    session/<client_id>   acl/method/<prefix>
    vo/<path>             acl/user/<name>
"""

from __future__ import annotations

import base64
import binascii
import os
import threading
from abc import ABC, abstractmethod
from typing import Iterator, Optional

from .errors import CorruptRecord, StorageFailure

_VERSION = b"1"


def _as_bytes(x) -> bytes:
    return x.encode("utf-8") if isinstance(x, str) else bytes(x)


class KvStore(ABC):
    """Abstract byte-string map with durable puts and prefix scans."""

    @abstractmethod
    def put(self, key, value) -> None: ...

    @abstractmethod
    def get(self, key) -> Optional[bytes]: ...

    @abstractmethod
    def delete(self, key) -> None: ...

    @abstractmethod
    def scan(self, prefix) -> list[tuple[bytes, bytes]]: ...

    def close(self) -> None:
        pass


class MemoryKvStore(KvStore):
    """Non-durable store for tests and ephemeral servers."""

    def __init__(self):
        self._data: dict[bytes, bytes] = {}
        self._lock = threading.RLock()

    def put(self, key, value) -> None:
        key = _as_bytes(key)
        if not key:
            raise StorageFailure("empty key")
        with self._lock:
            self._data[key] = _as_bytes(value)

    def get(self, key) -> Optional[bytes]:
        with self._lock:
            return self._data.get(_as_bytes(key))

    def delete(self, key) -> None:
        with self._lock:
            self._data.pop(_as_bytes(key), None)

    def scan(self, prefix) -> list[tuple[bytes, bytes]]:
        prefix = _as_bytes(prefix)
        with self._lock:
            return sorted(
                (k, v) for k, v in self._data.items() if k.startswith(prefix)
            )


class FileKvStore(KvStore):
    def __init__(self, root: str, sync: bool = True):
        self._root = root
        self._sync = sync
        self._lock = threading.RLock()
        self._data: dict[bytes, bytes] = {}
        try:
            os.makedirs(root, exist_ok=True)
            self._log_path = os.path.join(root, "wal.log")
            self._replay()
            self._log = open(self._log_path, "ab")
        except OSError as exc:
            raise StorageFailure(f"cannot open store at {root}: {exc}") from exc

    # --- log handling ---

    def _replay(self) -> None:
        if not os.path.exists(self._log_path):
            return
        with open(self._log_path, "rb") as fh:
            raw = fh.read()
        lines = raw.split(b"\n")
        # Anything after the final newline is a torn write; drop it.
        tail = lines.pop()
        if tail:
            self._truncate_tail(len(raw) - len(tail))
        for lineno, line in enumerate(lines):
            if not line:
                continue
            try:
                self._apply(line)
            except CorruptRecord:
                if lineno == len(lines) - 1:
                    self._truncate_tail(raw.rfind(line))
                    break
                raise

    def _truncate_tail(self, size: int) -> None:
        with open(self._log_path, "r+b") as fh:
            fh.truncate(size)

    def _apply(self, line: bytes) -> None:
        fields = line.split(b"\t")
        try:
            if fields[0] != _VERSION:
                raise CorruptRecord(f"unknown record version {fields[0]!r}")
            op = fields[1]
            key = base64.b64decode(fields[2], validate=True)
            if op == b"put":
                self._data[key] = base64.b64decode(fields[3], validate=True)
            elif op == b"del":
                self._data.pop(key, None)
            else:
                raise CorruptRecord(f"unknown op {op!r}")
        except (IndexError, binascii.Error) as exc:
            raise CorruptRecord(f"undecodable record: {line!r}") from exc

    def _append(self, op: bytes, key: bytes, value: Optional[bytes]) -> None:
        fields = [_VERSION, op, base64.b64encode(key)]
        if value is not None:
            fields.append(base64.b64encode(value))
        try:
            self._log.write(b"\t".join(fields) + b"\n")
            self._log.flush()
            if self._sync:
                os.fsync(self._log.fileno())
        except OSError as exc:
            raise StorageFailure(f"log write failed: {exc}") from exc

    # --- map operations ---

    def put(self, key, value) -> None:
        key, value = _as_bytes(key), _as_bytes(value)
        if not key:
            raise StorageFailure("empty key")
        with self._lock:
            self._append(b"put", key, value)
            self._data[key] = value

    def get(self, key) -> Optional[bytes]:
        with self._lock:
            return self._data.get(_as_bytes(key))

    def delete(self, key) -> None:
        key = _as_bytes(key)
        with self._lock:
            if key in self._data:
                self._append(b"del", key, None)
                del self._data[key]

    def scan(self, prefix) -> list[tuple[bytes, bytes]]:
        prefix = _as_bytes(prefix)
        with self._lock:
            return sorted(
                (k, v) for k, v in self._data.items() if k.startswith(prefix)
            )

    def compact(self) -> None:
        """Rewrite the log to one put per live key."""
        with self._lock:
            tmp = self._log_path + ".tmp"
            with open(tmp, "wb") as fh:
                for key in sorted(self._data):
                    fh.write(b"\t".join([
                        _VERSION, b"put",
                        base64.b64encode(key),
                        base64.b64encode(self._data[key]),
                    ]) + b"\n")
                fh.flush()
                os.fsync(fh.fileno())
            self._log.close()
            os.replace(tmp, self._log_path)
            self._log = open(self._log_path, "ab")

    def close(self) -> None:
        with self._lock:
            if not self._log.closed:
                self._log.close()

    # --- backup ---

    def export_records(self) -> Iterator[str]:
        """Full store as newline-delimited text records (version, key, value)."""
        with self._lock:
            items = sorted(self._data.items())
        for key, value in items:
            yield "\t".join([
                _VERSION.decode(),
                base64.b64encode(key).decode(),
                base64.b64encode(value).decode(),
            ])

    def import_records(self, lines) -> int:
        count = 0
        for line in lines:
            line = line.strip()
            if not line:
                continue
            fields = line.split("\t")
            if len(fields) != 3 or fields[0] != _VERSION.decode():
                raise CorruptRecord(f"bad import record: {line!r}")
            try:
                key = base64.b64decode(fields[1], validate=True)
                value = base64.b64decode(fields[2], validate=True)
            except binascii.Error as exc:
                raise CorruptRecord(f"bad import record: {line!r}") from exc
            self.put(key, value)
            count += 1
        return count
