"""Embedded key-value store with atomic check-and-insert and a store-wide sequence.

One SQLite file holds a single ``kv`` table plus a ``seq`` counter row.  Writers
serialize on a process-wide lock and run inside explicit transactions, so a
check-and-insert either fully lands or leaves no trace; readers use their own
per-thread connections and never block behind writers (WAL mode).  Keys order
by code point, which makes prefix scans deterministic.
"""

from __future__ import annotations

import sqlite3
import threading
from contextlib import contextmanager
from typing import Iterator, Optional

from confplane.errors import StoreOpenFailure

__all__ = ["KeyExists", "KVStore"]


class KeyExists(Exception):
    """Raised by insert when the key is already present."""

    def __init__(self, key: str):
        super().__init__(f"key exists: {key}")
        self.key = key


class _Txn:
    """Write-transaction handle; all reads through it see the writer's snapshot."""

    def __init__(self, conn: sqlite3.Connection):
        self._conn = conn

    def get(self, key: str) -> Optional[str]:
        row = self._conn.execute("SELECT value FROM kv WHERE key = ?", (key,)).fetchone()
        return None if row is None else row[0]

    def scan(self, prefix: str) -> list[tuple[str, str]]:
        return _scan(self._conn, prefix)

    def insert(self, key: str, value: str) -> None:
        try:
            self._conn.execute("INSERT INTO kv (key, value) VALUES (?, ?)", (key, value))
        except sqlite3.IntegrityError as exc:
            raise KeyExists(key) from exc

    def put(self, key: str, value: str) -> None:
        self._conn.execute(
            "INSERT INTO kv (key, value) VALUES (?, ?) "
            "ON CONFLICT(key) DO UPDATE SET value = excluded.value",
            (key, value),
        )

    def delete(self, key: str) -> bool:
        cur = self._conn.execute("DELETE FROM kv WHERE key = ?", (key,))
        return cur.rowcount > 0

    def next_seq(self) -> int:
        row = self._conn.execute(
            "UPDATE kv SET value = CAST(CAST(value AS INTEGER) + 1 AS TEXT) "
            "WHERE key = 'seq' RETURNING value"
        ).fetchone()
        return int(row[0])


def _scan(conn: sqlite3.Connection, prefix: str) -> list[tuple[str, str]]:
    # substr comparison keeps matching case-sensitive, unlike LIKE
    rows = conn.execute(
        "SELECT key, value FROM kv WHERE substr(key, 1, ?) = ? ORDER BY key",
        (len(prefix), prefix),
    ).fetchall()
    return [(row[0], row[1]) for row in rows]


class KVStore:
    """Thread-safe embedded store over one SQLite file."""

    def __init__(self, path: str):
        self._path = str(path)
        self._write_lock = threading.RLock()
        self._local = threading.local()
        self._conns: list[sqlite3.Connection] = []
        self._conns_guard = threading.Lock()
        self._closed = False
        try:
            conn = self._connection()
            with self._write_lock:
                conn.execute("BEGIN IMMEDIATE")
                conn.execute(
                    "CREATE TABLE IF NOT EXISTS kv (key TEXT PRIMARY KEY, value TEXT NOT NULL)"
                )
                conn.execute("INSERT OR IGNORE INTO kv (key, value) VALUES ('seq', '0')")
                conn.execute("COMMIT")
        except sqlite3.Error as exc:
            raise StoreOpenFailure(f"cannot open store at {self._path}: {exc}") from exc

    @property
    def path(self) -> str:
        return self._path

    def _connection(self) -> sqlite3.Connection:
        conn = getattr(self._local, "conn", None)
        if conn is not None:
            return conn
        if self._closed:
            raise StoreOpenFailure(f"store at {self._path} is closed")
        conn = sqlite3.connect(
            self._path, timeout=30.0, isolation_level=None, check_same_thread=False
        )
        conn.execute("PRAGMA journal_mode=WAL")
        conn.execute("PRAGMA synchronous=FULL")
        self._local.conn = conn
        with self._conns_guard:
            self._conns.append(conn)
        return conn

    # -- reads ---------------------------------------------------------------

    def get(self, key: str) -> Optional[str]:
        row = self._connection().execute(
            "SELECT value FROM kv WHERE key = ?", (key,)
        ).fetchone()
        return None if row is None else row[0]

    def scan(self, prefix: str) -> list[tuple[str, str]]:
        """All (key, value) pairs whose key starts with prefix, in key order."""
        return _scan(self._connection(), prefix)

    def current_seq(self) -> int:
        return int(self.get("seq") or "0")

    # -- writes --------------------------------------------------------------

    @contextmanager
    def transact(self) -> Iterator[_Txn]:
        """One atomic write transaction; rolls back on any exception."""
        with self._write_lock:
            conn = self._connection()
            conn.execute("BEGIN IMMEDIATE")
            try:
                yield _Txn(conn)
            except BaseException:
                conn.execute("ROLLBACK")
                raise
            else:
                conn.execute("COMMIT")

    def insert(self, key: str, value: str) -> None:
        """Atomic check-and-insert; raises KeyExists when the key is taken."""
        with self.transact() as txn:
            txn.insert(key, value)

    def put(self, key: str, value: str) -> None:
        with self.transact() as txn:
            txn.put(key, value)

    def delete(self, key: str) -> bool:
        with self.transact() as txn:
            return txn.delete(key)

    def next_seq(self) -> int:
        with self.transact() as txn:
            return txn.next_seq()

    def close(self) -> None:
        """Flush the write-ahead log into the main file and drop all connections."""
        with self._conns_guard:
            conns, self._conns = self._conns, []
            self._closed = True
        self._local = threading.local()
        for conn in conns:
            try:
                conn.execute("PRAGMA wal_checkpoint(TRUNCATE)")
            except sqlite3.Error:
                pass
            conn.close()
