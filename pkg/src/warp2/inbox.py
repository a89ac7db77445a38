"""The shared inbox pool: append-only, content-addressed, ciphertext-only.

One public pool serves every user; there are no per-user mailboxes, so access
patterns never name a recipient.  A record is keyed by the hash of its sealed
header and carries only ciphertext, hashes, and an arrival sequence number.

Storage is a sqlite index plus a blob directory whose filenames are the
SHA-256 of the (encrypted) blob contents.  Purging a record tombstones it --
(header_id, receipt_lock, seq) survive so replayed uploads and receipts stay
idempotent -- and deletes its blobs once no live record references them.
compact() hard-deletes tombstones older than a retention window.
"""

from __future__ import annotations

import os
import sqlite3
import threading
import time
from dataclasses import dataclass
from pathlib import Path

from .crypto import HASH_SIZE, sha256
from .header import HEADER_CT_SIZE

DEFAULT_PAGE_LIMIT = 1000
DEFAULT_BLOB_LIMIT = 25 * 1024 * 1024


class OversizeBlob(ValueError):
    """Blob exceeds the configured size limit."""


class MalformedEnvelope(ValueError):
    """Upload pieces do not form a plausible envelope."""


class NotFound(LookupError):
    """Unknown or purged record."""


class NoAttachment(LookupError):
    """The message exists but carries no attachment."""


@dataclass
class HeaderEntry:
    seq: int
    header_id: bytes
    header_ct: bytes


@dataclass
class HeaderPage:
    entries: list[HeaderEntry]
    next_cursor: int


@dataclass
class StoreStats:
    live: int
    purged: int
    total_bytes: int


_SCHEMA = """
CREATE TABLE IF NOT EXISTS records (
    seq             INTEGER PRIMARY KEY AUTOINCREMENT,
    header_id       TEXT UNIQUE NOT NULL,
    header_ct       BLOB NOT NULL,
    body_hash       TEXT NOT NULL,
    attachment_hash TEXT,
    receipt_lock    TEXT NOT NULL,
    state           TEXT NOT NULL DEFAULT 'live',
    stored_bytes    INTEGER NOT NULL,
    purged_at       REAL
);
CREATE INDEX IF NOT EXISTS idx_records_lock ON records (receipt_lock);
CREATE INDEX IF NOT EXISTS idx_records_state_seq ON records (state, seq);
"""


class InboxStore:
    """Thread-safe store backing the public inbox API.

    All public methods are linearizable per record: a single lock serializes
    mutations, and sqlite WAL mode keeps readers consistent.
    """

    def __init__(
        self,
        data_dir: str | Path,
        page_limit: int = DEFAULT_PAGE_LIMIT,
        blob_limit: int = DEFAULT_BLOB_LIMIT,
    ) -> None:
        self.data_dir = Path(data_dir)
        self.blob_dir = self.data_dir / "blobs"
        self.blob_dir.mkdir(parents=True, exist_ok=True)
        self.page_limit = page_limit
        self.blob_limit = blob_limit
        self._lock = threading.RLock()
        self._db = sqlite3.connect(self.data_dir / "inbox.sqlite3", check_same_thread=False)
        self._db.execute("PRAGMA journal_mode=WAL")
        self._db.execute("PRAGMA synchronous=NORMAL")
        self._db.executescript(_SCHEMA)
        self._db.commit()

    def close(self) -> None:
        with self._lock:
            self._db.commit()
            self._db.close()

    # -- blob files ----------------------------------------------------------

    def _blob_path(self, blob_hash_hex: str) -> Path:
        return self.blob_dir / blob_hash_hex

    def _write_blob(self, data: bytes) -> str:
        digest = sha256(data).hex()
        path = self._blob_path(digest)
        if not path.exists():
            tmp = path.with_name(f".tmp-{os.getpid()}-{digest}")
            tmp.write_bytes(data)
            tmp.replace(path)
        return digest

    def _drop_blob_if_unreferenced(self, blob_hash_hex: str | None) -> None:
        if blob_hash_hex is None:
            return
        row = self._db.execute(
            "SELECT COUNT(*) FROM records WHERE state='live' "
            "AND (body_hash=? OR attachment_hash=?)",
            (blob_hash_hex, blob_hash_hex),
        ).fetchone()
        if row[0] == 0:
            self._blob_path(blob_hash_hex).unlink(missing_ok=True)

    # -- operations ----------------------------------------------------------

    def upload(
        self,
        header_ct: bytes,
        body_ct: bytes,
        attachment_ct: bytes | None,
        receipt_lock: bytes,
    ) -> tuple[bytes, int]:
        """Store one envelope; returns (header_id, seq).

        Idempotent: re-uploading an identical envelope (same header_ct) returns
        the original identity without creating a duplicate record, and never
        resurrects a purged one.
        """
        if len(header_ct) != HEADER_CT_SIZE:
            raise MalformedEnvelope(
                f"header_ct must be exactly {HEADER_CT_SIZE} bytes, got {len(header_ct)}"
            )
        if len(receipt_lock) != HASH_SIZE:
            raise MalformedEnvelope("receipt_lock must be 32 bytes")
        if not body_ct:
            raise MalformedEnvelope("body_ct must be non-empty")
        if attachment_ct is not None and not attachment_ct:
            raise MalformedEnvelope("attachment_ct, when given, must be non-empty")
        if len(body_ct) > self.blob_limit:
            raise OversizeBlob(f"body blob exceeds limit of {self.blob_limit} bytes")
        if attachment_ct is not None and len(attachment_ct) > self.blob_limit:
            raise OversizeBlob(f"attachment blob exceeds limit of {self.blob_limit} bytes")

        header_id = sha256(header_ct)
        hid = header_id.hex()
        with self._lock:
            row = self._db.execute(
                "SELECT seq FROM records WHERE header_id=?", (hid,)
            ).fetchone()
            if row is not None:
                return header_id, row[0]

            body_hash = self._write_blob(body_ct)
            attachment_hash = (
                self._write_blob(attachment_ct) if attachment_ct is not None else None
            )
            stored = len(header_ct) + len(body_ct) + len(attachment_ct or b"")
            cur = self._db.execute(
                "INSERT INTO records "
                "(header_id, header_ct, body_hash, attachment_hash, receipt_lock, stored_bytes) "
                "VALUES (?, ?, ?, ?, ?, ?)",
                (hid, header_ct, body_hash, attachment_hash, receipt_lock.hex(), stored),
            )
            self._db.commit()
            return header_id, cur.lastrowid

    def list_headers(self, after: int, limit: int | None = None) -> HeaderPage:
        """Live records with seq > after, ascending, up to the page limit."""
        if after < 0:
            raise ValueError("cursor must be >= 0")
        page_size = self.page_limit if limit is None else min(limit, self.page_limit)
        with self._lock:
            rows = self._db.execute(
                "SELECT seq, header_id, header_ct FROM records "
                "WHERE state='live' AND seq>? ORDER BY seq LIMIT ?",
                (after, page_size),
            ).fetchall()
        entries = [HeaderEntry(seq, bytes.fromhex(hid), ct) for seq, hid, ct in rows]
        next_cursor = entries[-1].seq if entries else after
        return HeaderPage(entries=entries, next_cursor=next_cursor)

    def fetch_blob(self, kind: str, header_id: bytes) -> bytes:
        """Return the stored body/attachment ciphertext for one message."""
        if kind not in ("body", "attachment"):
            raise ValueError(f"unknown blob kind {kind!r}")
        with self._lock:
            row = self._db.execute(
                "SELECT state, body_hash, attachment_hash FROM records WHERE header_id=?",
                (header_id.hex(),),
            ).fetchone()
            if row is None or row[0] != "live":
                raise NotFound(f"no live record for {header_id.hex()}")
            state, body_hash, attachment_hash = row
            if kind == "attachment":
                if attachment_hash is None:
                    raise NoAttachment(f"{header_id.hex()} has no attachment")
                return self._blob_path(attachment_hash).read_bytes()
            return self._blob_path(body_hash).read_bytes()

    def acknowledge(self, preimage: bytes) -> bool:
        """Purge the record(s) whose receipt_lock is the hash of preimage.

        Tolerates arbitrary input; anything that does not hash to a live lock
        returns False with no state change, no matter how often it is replayed.
        """
        lock_hex = sha256(preimage).hex()
        with self._lock:
            rows = self._db.execute(
                "SELECT seq, body_hash, attachment_hash FROM records "
                "WHERE state='live' AND receipt_lock=?",
                (lock_hex,),
            ).fetchall()
            if not rows:
                return False
            now = time.time()
            for seq, body_hash, attachment_hash in rows:
                self._db.execute(
                    "UPDATE records SET state='purged', purged_at=? WHERE seq=?",
                    (now, seq),
                )
            self._db.commit()
            for _, body_hash, attachment_hash in rows:
                self._drop_blob_if_unreferenced(body_hash)
                self._drop_blob_if_unreferenced(attachment_hash)
            return True

    def stats(self) -> StoreStats:
        with self._lock:
            live, live_bytes = self._db.execute(
                "SELECT COUNT(*), COALESCE(SUM(stored_bytes), 0) "
                "FROM records WHERE state='live'"
            ).fetchone()
            purged = self._db.execute(
                "SELECT COUNT(*) FROM records WHERE state='purged'"
            ).fetchone()[0]
        return StoreStats(live=live, purged=purged, total_bytes=live_bytes)

    def compact(self, retention_seconds: float) -> int:
        """Hard-delete tombstones purged more than retention_seconds ago."""
        cutoff = time.time() - retention_seconds
        with self._lock:
            cur = self._db.execute(
                "DELETE FROM records WHERE state='purged' AND purged_at < ?",
                (cutoff,),
            )
            self._db.commit()
            return cur.rowcount

    def checkpoint(self) -> None:
        """Flush the WAL into the main database file."""
        with self._lock:
            self._db.commit()
            self._db.execute("PRAGMA wal_checkpoint(TRUNCATE)")
