"""Client-side access to the inbox server's HTTP/JSON API.

Wraps an httpx client so the sync engine never sees JSON framing; blobs go in
and out as raw bytes.  Any connection-level problem surfaces as NetworkFailure;
application-level rejections carry the server's error code.
"""

from __future__ import annotations

import base64
from dataclasses import dataclass

import httpx


class NetworkFailure(ConnectionError):
    """Could not complete the HTTP exchange; safe to retry."""


class ServerRejected(RuntimeError):
    """Server answered with an application error code."""

    def __init__(self, code: str, detail: str = "") -> None:
        super().__init__(f"{code}: {detail}" if detail else code)
        self.code = code
        self.detail = detail


class BlobMissing(ServerRejected):
    """Requested blob is unknown or purged."""


class NoAttachmentOnServer(ServerRejected):
    """Message exists but has no attachment blob."""


@dataclass
class RemoteHeader:
    seq: int
    header_id: bytes
    header_ct: bytes


class HttpInboxTransport:
    """Talks to one inbox server.

    Accepts any httpx.Client-compatible object, which keeps tests in-process:
    fastapi's TestClient plugs straight in.
    """

    def __init__(self, base_url: str = "", http: httpx.Client | None = None) -> None:
        if http is None:
            http = httpx.Client(base_url=base_url, timeout=30.0)
        self._http = http

    def close(self) -> None:
        self._http.close()

    def _request(self, method: str, path: str, **kwargs) -> httpx.Response:
        try:
            resp = self._http.request(method, path, **kwargs)
        except httpx.HTTPError as exc:
            raise NetworkFailure(f"{method} {path}: {exc}") from exc
        if resp.status_code >= 500:
            raise NetworkFailure(f"{method} {path}: server error {resp.status_code}")
        return resp

    @staticmethod
    def _raise_rejection(resp: httpx.Response) -> None:
        try:
            payload = resp.json()
        except ValueError:
            payload = {}
        code = payload.get("error", f"http-{resp.status_code}")
        detail = payload.get("detail", "")
        if code == "not-found":
            raise BlobMissing(code, detail)
        if code == "no-attachment":
            raise NoAttachmentOnServer(code, detail)
        raise ServerRejected(code, detail)

    def upload(
        self,
        header_ct: bytes,
        body_ct: bytes,
        attachment_ct: bytes | None,
        receipt_lock: bytes,
    ) -> tuple[bytes, int]:
        payload = {
            "header_ct": base64.b64encode(header_ct).decode("ascii"),
            "body_ct": base64.b64encode(body_ct).decode("ascii"),
            "receipt_lock": receipt_lock.hex(),
        }
        if attachment_ct is not None:
            payload["attachment_ct"] = base64.b64encode(attachment_ct).decode("ascii")
        resp = self._request("POST", "/v1/messages", json=payload)
        if resp.status_code != 200:
            self._raise_rejection(resp)
        data = resp.json()
        return bytes.fromhex(data["header_id"]), data["seq"]

    def list_headers(self, after: int, limit: int | None = None) -> tuple[list[RemoteHeader], int]:
        params: dict = {"after": after}
        if limit is not None:
            params["limit"] = limit
        resp = self._request("GET", "/v1/headers", params=params)
        if resp.status_code != 200:
            self._raise_rejection(resp)
        data = resp.json()
        entries = [
            RemoteHeader(
                seq=e["seq"],
                header_id=bytes.fromhex(e["header_id"]),
                header_ct=base64.b64decode(e["header_ct"]),
            )
            for e in data["entries"]
        ]
        return entries, data["next_cursor"]

    def fetch_blob(self, kind: str, header_id: bytes) -> bytes:
        resp = self._request("GET", f"/v1/blob/{kind}/{header_id.hex()}")
        if resp.status_code != 200:
            self._raise_rejection(resp)
        key = "body_ct" if kind == "body" else "attachment_ct"
        return base64.b64decode(resp.json()[key])

    def acknowledge(self, preimage: bytes) -> bool:
        resp = self._request("POST", "/v1/receipts", json={"preimage": preimage.hex()})
        if resp.status_code != 200:
            self._raise_rejection(resp)
        return resp.json()["purged"]

    def stats(self) -> dict:
        resp = self._request("GET", "/v1/stats")
        if resp.status_code != 200:
            self._raise_rejection(resp)
        return resp.json()
