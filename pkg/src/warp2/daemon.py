"""Local daemon: a loopback HTTP face over one MailClient.

The browser UI and scripts talk to this instead of holding key material
themselves.  Every /local/* request must carry the bearer token the daemon
mints at startup; the token and URL are written to ``daemon.json`` inside the
data directory (owner-only) so other local processes can find them, and the
printed URL carries the token in the fragment, which browsers never send over
the wire.

The static web UI, when bundled, is served from the same origin; the daemon
is the only network peer the browser ever contacts.
"""

from __future__ import annotations

import base64
import json
import os
import secrets
from importlib import resources
from pathlib import Path

from fastapi import Depends, FastAPI, Header, Request
from fastapi.exceptions import RequestValidationError
from fastapi.responses import FileResponse, JSONResponse
from pydantic import BaseModel

from . import crypto
from .client import (
    DuplicateAlias,
    MailClient,
    NotInMailstore,
    RotationPending,
    StoredMessage,
    UnknownContact,
)
from .load import LoadParams, estimate
from .transport import NetworkFailure, ServerRejected

DEFAULT_DAEMON_PORT = 9621


def _error(status: int, code: str, detail: str = "") -> JSONResponse:
    return JSONResponse(status_code=status, content={"error": code, "detail": detail})


class SendRequest(BaseModel):
    to: str
    subject: str
    body: str = ""
    attachment_b64: str | None = None


class ContactRequest(BaseModel):
    alias: str
    public_key: str


def _view(msg: StoredMessage) -> dict:
    peer = msg.to_addr if msg.direction == "sent" else msg.from_addr
    return {
        "id": msg.header_id,
        "direction": msg.direction,
        "peer": peer,
        "subject": msg.subject,
        "date": msg.date,
        "has_attachment": msg.attachment is not None,
        "read": msg.read,
        "acked": msg.acked,
        "purged_from_server": msg.purged_from_server,
    }


def _contact_view(contact) -> dict:
    return {
        "alias": contact.alias,
        "public_key": crypto.export_public_key(contact.current_pub),
        "rotation_state": contact.rotation_state,
        "previous_keys": len(contact.previous_pubs),
    }


def create_daemon_app(
    client: MailClient,
    token: str,
    server_url: str = "",
    webui_dir: Path | None = None,
) -> FastAPI:
    app = FastAPI(title="warp2 local daemon", docs_url=None, redoc_url=None)

    async def require_token(authorization: str = Header(default="")) -> None:
        if not secrets.compare_digest(authorization, f"Bearer {token}"):
            raise _Unauthorized()

    class _Unauthorized(Exception):
        pass

    @app.exception_handler(_Unauthorized)
    async def unauthorized_handler(request: Request, exc: _Unauthorized):
        return _error(401, "unauthorized", "missing or wrong bearer token")

    @app.exception_handler(RequestValidationError)
    async def validation_handler(request: Request, exc: RequestValidationError):
        return _error(400, "invalid-input", str(exc))

    @app.exception_handler(UnknownContact)
    async def unknown_contact_handler(request: Request, exc: UnknownContact):
        return _error(400, "unknown-contact", str(exc))

    @app.exception_handler(DuplicateAlias)
    async def duplicate_alias_handler(request: Request, exc: DuplicateAlias):
        return _error(409, "duplicate-alias", str(exc))

    @app.exception_handler(NotInMailstore)
    async def not_in_mailstore_handler(request: Request, exc: NotInMailstore):
        return _error(404, "not-found", str(exc))

    @app.exception_handler(RotationPending)
    async def rotation_pending_handler(request: Request, exc: RotationPending):
        return _error(409, "rotation-pending", str(exc))

    @app.exception_handler(NetworkFailure)
    async def network_failure_handler(request: Request, exc: NetworkFailure):
        return _error(502, "network-failure", str(exc))

    @app.exception_handler(ServerRejected)
    async def server_rejected_handler(request: Request, exc: ServerRejected):
        return _error(502, "server-rejected", f"{exc.code}: {exc.detail}")

    @app.exception_handler(ValueError)
    async def value_error_handler(request: Request, exc: ValueError):
        return _error(400, "invalid-input", str(exc))

    guarded = Depends(require_token)

    @app.get("/local/messages", dependencies=[guarded])
    def list_messages():
        msgs = [_view(m) for m in reversed(client.all_messages())]
        return {"messages": msgs}

    @app.get("/local/messages/{header_id}", dependencies=[guarded])
    def message_detail(header_id: str):
        msg = client.get_message(header_id)
        client.mark_read(header_id)
        view = _view(msg)
        view["body"] = msg.body.decode("utf-8", errors="replace")
        view["attachment_b64"] = (
            base64.b64encode(msg.attachment).decode("ascii")
            if msg.attachment is not None
            else None
        )
        return view

    @app.post("/local/send", dependencies=[guarded])
    def send(req: SendRequest):
        attachment = base64.b64decode(req.attachment_b64) if req.attachment_b64 else None
        header_id = client.send(req.to, req.subject, req.body.encode("utf-8"), attachment)
        queued = any(p["header_id"] == header_id for p in client.pending_uploads)
        return {"header_id": header_id, "queued": queued}

    @app.post("/local/ack/{header_id}", dependencies=[guarded])
    def acknowledge(header_id: str):
        return {"purged": client.acknowledge(header_id)}

    @app.post("/local/sync", dependencies=[guarded])
    def sync():
        report = client.sync()
        return {
            "pages": report.pages,
            "attempted_decrypts": report.attempted_decrypts,
            "new_message_ids": report.new_message_ids,
            "skipped": report.skipped,
            "quarantined": report.quarantined,
            "cursor": report.cursor,
            "delivered_ids": report.delivered_ids,
        }

    @app.get("/local/contacts", dependencies=[guarded])
    def list_contacts():
        return {"contacts": [_contact_view(c) for c in client.contacts.values()]}

    @app.post("/local/contacts", dependencies=[guarded])
    def add_contact(req: ContactRequest):
        return _contact_view(client.import_contact(req.alias, req.public_key))

    @app.post("/local/rotate/{alias}", dependencies=[guarded])
    def rotate(alias: str):
        header_id = client.rotate_keys(alias)
        return {
            "header_id": header_id,
            "rotation_state": client.contacts[alias].rotation_state,
        }

    @app.get("/local/status", dependencies=[guarded])
    def status():
        st = client.status()
        st["server_url"] = server_url
        return st

    @app.get("/local/plan", dependencies=[guarded])
    def plan(
        users: int = 1000,
        rate: int = 10,
        header_size: int | None = None,
        syncs: int = 1,
    ):
        params = (
            LoadParams(users, rate, syncs_per_user_per_day=syncs)
            if header_size is None
            else LoadParams(users, rate, header_size, syncs)
        )
        est = estimate(params)
        return {
            "params": {
                "users": params.users,
                "messages_per_user_per_day": params.messages_per_user_per_day,
                "header_ct_size": params.header_ct_size,
                "syncs_per_user_per_day": params.syncs_per_user_per_day,
            },
            "daily_new_header_bytes": est.daily_new_header_bytes,
            "per_client_daily_decrypt_bytes": est.per_client_daily_decrypt_bytes,
            "server_daily_egress_bytes": est.server_daily_egress_bytes,
            "trial_decryptions_per_client_per_day": est.trial_decryptions_per_client_per_day,
        }

    if webui_dir is None:
        bundled = resources.files("warp2") / "webui"
        if bundled.is_dir():
            webui_dir = Path(str(bundled))
    if webui_dir is not None and Path(webui_dir).is_dir():
        ui = Path(webui_dir)

        @app.get("/", include_in_schema=False)
        def index():
            return FileResponse(ui / "index.html")

        @app.get("/{asset}", include_in_schema=False)
        def asset(asset: str):
            target = (ui / asset).resolve()
            if target.parent != ui.resolve() or not target.is_file():
                return _error(404, "not-found", asset)
            return FileResponse(target)

    return app


def write_daemon_manifest(data_dir: Path, url: str, token: str) -> Path:
    """Drop a discovery file so local tools can find the running daemon."""
    manifest = data_dir / "daemon.json"
    manifest.write_text(json.dumps({"url": url, "token": token, "pid": os.getpid()}))
    try:
        os.chmod(manifest, 0o600)
    except OSError:
        pass
    return manifest


def run_daemon(
    client: MailClient,
    server_url: str,
    host: str = "127.0.0.1",
    port: int = DEFAULT_DAEMON_PORT,
) -> None:
    import uvicorn

    token = secrets.token_urlsafe(32)
    app = create_daemon_app(client, token, server_url=server_url)
    url = f"http://{host}:{port}"
    write_daemon_manifest(client.state_path.parent, url, token)
    # The fragment never leaves the browser, so the token does not show up in
    # request logs.
    print(f"warp2 daemon for {client.address!r} on {url}/#token={token}")
    uvicorn.run(app, host=host, port=port, log_level="warning")
