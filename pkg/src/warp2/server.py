"""HTTP/JSON surface of the shared inbox.

All request/response bodies are JSON; blobs travel base64-encoded, hashes as
64-char lowercase hex.  Bit-exactness lives in the decoded blobs, not the JSON
framing.  The server speaks plain HTTP and expects a TLS-terminating reverse
proxy in any real deployment; it never sees plaintext either way.

Uploads and receipts are open to anyone (no accounts), throttled only by a
per-address token bucket.
"""

from __future__ import annotations

import base64
import binascii
import json
import os
import threading
import time
from dataclasses import dataclass, field
from pathlib import Path

from fastapi import FastAPI, Request
from fastapi.exceptions import RequestValidationError
from fastapi.responses import JSONResponse
from pydantic import BaseModel

from . import inbox
from .inbox import InboxStore

DEFAULT_RATE_PER_MIN = 60


@dataclass
class ServerConfig:
    listen_host: str = "127.0.0.1"
    listen_port: int = 9620
    data_dir: str = "warp2-server-data"
    page_limit: int = inbox.DEFAULT_PAGE_LIMIT
    blob_limit: int = inbox.DEFAULT_BLOB_LIMIT
    # Requests per minute per client address for uploads and receipts;
    # None disables throttling.
    rate_per_min: float | None = DEFAULT_RATE_PER_MIN
    tombstone_retention_days: float = 30.0

    @classmethod
    def load(cls, path: str | Path | None = None, env: dict | None = None) -> "ServerConfig":
        """Config file values overridden by WARP2_SERVER_* environment variables."""
        env = os.environ if env is None else env
        values: dict = {}
        if path is not None:
            values.update(json.loads(Path(path).read_text()))
        mapping = {
            "WARP2_SERVER_HOST": ("listen_host", str),
            "WARP2_SERVER_PORT": ("listen_port", int),
            "WARP2_SERVER_DATA_DIR": ("data_dir", str),
            "WARP2_SERVER_PAGE_LIMIT": ("page_limit", int),
            "WARP2_SERVER_BLOB_LIMIT": ("blob_limit", int),
            "WARP2_SERVER_RATE_PER_MIN": (
                "rate_per_min",
                lambda v: None if v.lower() in ("none", "off") else float(v),
            ),
            "WARP2_SERVER_RETENTION_DAYS": ("tombstone_retention_days", float),
        }
        for var, (key, cast) in mapping.items():
            if var in env:
                values[key] = cast(env[var])
        known = {f for f in cls.__dataclass_fields__}
        unknown = set(values) - known
        if unknown:
            raise ValueError(f"unknown server config keys: {sorted(unknown)}")
        return cls(**values)


class TokenBucket:
    """Per-key token bucket: rate_per_min requests/minute, burst of the same size."""

    def __init__(self, rate_per_min: float) -> None:
        self.rate = rate_per_min / 60.0
        self.burst = rate_per_min
        self._buckets: dict[str, tuple[float, float]] = {}
        self._lock = threading.Lock()

    def allow(self, key: str, now: float | None = None) -> bool:
        now = time.monotonic() if now is None else now
        with self._lock:
            tokens, last = self._buckets.get(key, (self.burst, now))
            tokens = min(self.burst, tokens + (now - last) * self.rate)
            if tokens < 1.0:
                self._buckets[key] = (tokens, now)
                return False
            self._buckets[key] = (tokens - 1.0, now)
            return True


class UploadRequest(BaseModel):
    header_ct: str
    body_ct: str
    attachment_ct: str | None = None
    receipt_lock: str


class ReceiptRequest(BaseModel):
    preimage: str


def _error(status: int, code: str, detail: str = "") -> JSONResponse:
    return JSONResponse(status_code=status, content={"error": code, "detail": detail})


def _b64decode(field_name: str, value: str) -> bytes:
    try:
        return base64.b64decode(value, validate=True)
    except (binascii.Error, ValueError):
        raise inbox.MalformedEnvelope(f"{field_name} is not valid base64") from None


def _hexdecode(field_name: str, value: str, size: int) -> bytes:
    if len(value) != size * 2 or value != value.lower():
        raise inbox.MalformedEnvelope(f"{field_name} must be {size * 2} lowercase hex chars")
    try:
        return bytes.fromhex(value)
    except ValueError:
        raise inbox.MalformedEnvelope(f"{field_name} is not hex") from None


def create_app(store: InboxStore, config: ServerConfig | None = None) -> FastAPI:
    config = config or ServerConfig()
    app = FastAPI(title="warp2 inbox", version="1")
    bucket = TokenBucket(config.rate_per_min) if config.rate_per_min else None

    def throttled(request: Request) -> bool:
        if bucket is None:
            return False
        client = request.client.host if request.client else "unknown"
        return not bucket.allow(client)

    @app.exception_handler(RequestValidationError)
    async def on_validation_error(request: Request, exc: RequestValidationError):
        return _error(400, "malformed-envelope", str(exc))

    @app.post("/v1/messages")
    def upload(req: UploadRequest, request: Request):
        if throttled(request):
            return _error(429, "rate-limited", "upload rate limit exceeded")
        try:
            header_ct = _b64decode("header_ct", req.header_ct)
            body_ct = _b64decode("body_ct", req.body_ct)
            attachment_ct = (
                _b64decode("attachment_ct", req.attachment_ct)
                if req.attachment_ct is not None
                else None
            )
            receipt_lock = _hexdecode("receipt_lock", req.receipt_lock, 32)
            header_id, seq = store.upload(header_ct, body_ct, attachment_ct, receipt_lock)
        except inbox.OversizeBlob as exc:
            return _error(413, "oversize-blob", str(exc))
        except inbox.MalformedEnvelope as exc:
            return _error(400, "malformed-envelope", str(exc))
        return {"header_id": header_id.hex(), "seq": seq}

    @app.get("/v1/headers")
    def list_headers(after: int = 0, limit: int | None = None):
        if after < 0:
            return _error(400, "bad-cursor", "after must be >= 0")
        page = store.list_headers(after, limit)
        return {
            "entries": [
                {
                    "seq": e.seq,
                    "header_id": e.header_id.hex(),
                    "header_ct": base64.b64encode(e.header_ct).decode("ascii"),
                }
                for e in page.entries
            ],
            "next_cursor": page.next_cursor,
        }

    @app.get("/v1/blob/{kind}/{header_id}")
    def fetch_blob(kind: str, header_id: str):
        if kind not in ("body", "attachment"):
            return _error(404, "not-found", f"unknown blob kind {kind!r}")
        try:
            hid = _hexdecode("header_id", header_id, 32)
        except inbox.MalformedEnvelope as exc:
            return _error(400, "bad-id", str(exc))
        try:
            blob = store.fetch_blob(kind, hid)
        except inbox.NoAttachment:
            return _error(404, "no-attachment", "message has no attachment")
        except inbox.NotFound:
            return _error(404, "not-found", "no live record with that id")
        key = "body_ct" if kind == "body" else "attachment_ct"
        return {key: base64.b64encode(blob).decode("ascii")}

    @app.post("/v1/receipts")
    def acknowledge(req: ReceiptRequest, request: Request):
        if throttled(request):
            return _error(429, "rate-limited", "receipt rate limit exceeded")
        try:
            preimage = bytes.fromhex(req.preimage)
        except ValueError:
            return _error(400, "bad-receipt", "preimage must be hex")
        return {"purged": store.acknowledge(preimage)}

    @app.get("/v1/stats")
    def stats():
        s = store.stats()
        return {"live": s.live, "purged": s.purged, "bytes": s.total_bytes}

    return app


def run_server(config: ServerConfig) -> None:
    """Blocking entry point used by the CLI `serve` command."""
    import uvicorn

    store = InboxStore(
        config.data_dir, page_limit=config.page_limit, blob_limit=config.blob_limit
    )
    app = create_app(store, config)
    try:
        uvicorn.run(app, host=config.listen_host, port=config.listen_port, log_level="warning")
    finally:
        store.close()
