"""Client engine: keyring, contacts, trial-decryption sync, receipts, rotation.

A client never asks the server "what is mine".  It pages every new sealed
header from the shared pool and tries to open each one with every live secret
key; failures go into a persistent skip-cache and are never retried, successes
are fetched, verified against their content hashes, and stored locally.

Key rotation is an in-band handshake of two one-way messages: each side sends
its fresh public key inside a normal sealed message (subject "\\x01KEYROTATE"),
so after the first out-of-band introduction, conversation keys are never again
linkable to that introduction.  Retired own keys survive a grace window so
mail sealed before the peer learned the new key still decrypts, then their
secret halves are destroyed.

Local state is one file, encrypted at rest with a passphrase-derived key
(scrypt + ChaCha20-Poly1305).  The file layout is documented in _encode_state
but is not a compatibility surface.  Every mutation is persisted atomically;
killing the process between operations loses nothing and re-delivers nothing.
"""

from __future__ import annotations

import base64
import hashlib
import json
import logging
import os
import threading
import time
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path

from . import crypto
from .crypto import KeyPair
from .header import (
    BlobDecryptFailure,
    HashMismatch,
    MalformedHeader,
    MessageHeader,
    canonical_serialize,
    compose_envelope,
    parse_header,
    verify_and_open,
)
from .transport import BlobMissing, NetworkFailure

log = logging.getLogger("warp2.client")

#: Subject tag marking an in-band key rotation payload.
ROTATE_SUBJECT = "\x01KEYROTATE"

DEFAULT_GRACE_SECONDS = 7 * 24 * 3600.0

_STATE_MAGIC = b"W2STATE1"
_SCRYPT_N, _SCRYPT_R, _SCRYPT_P = 2**14, 8, 1


class UnknownContact(KeyError):
    pass


class DuplicateAlias(ValueError):
    pass


class NotInMailstore(KeyError):
    pass


class RotationPending(RuntimeError):
    """A rotation offer to this contact is already in flight."""


class StateFileError(RuntimeError):
    """State file unreadable: corrupted bytes or wrong passphrase."""


def _b64(data: bytes) -> str:
    return base64.b64encode(data).decode("ascii")


def _unb64(text: str) -> bytes:
    return base64.b64decode(text)


def _iso(dt: datetime) -> str:
    return dt.astimezone(timezone.utc).strftime("%Y-%m-%dT%H:%M:%SZ")


def _from_iso(text: str) -> datetime:
    return datetime.strptime(text, "%Y-%m-%dT%H:%M:%SZ").replace(tzinfo=timezone.utc)


@dataclass
class OwnKey:
    key_id: str
    keypair: KeyPair
    status: str = "active"  # active | retired
    retired_at: float | None = None


class Keyring:
    """Own identity keys, newest-first, with grace-window retirement."""

    def __init__(self) -> None:
        self.keys: dict[str, OwnKey] = {}
        self.primary_id: str | None = None

    @staticmethod
    def key_id_for(public_part: bytes) -> str:
        return hashlib.sha256(public_part).hexdigest()[:16]

    def generate(self) -> OwnKey:
        kp = crypto.generate_keypair()
        own = OwnKey(key_id=self.key_id_for(kp.public_part), keypair=kp)
        self.keys[own.key_id] = own
        return own

    def ensure_primary(self) -> OwnKey:
        if self.primary_id is not None:
            own = self.keys.get(self.primary_id)
            if own is not None and own.status == "active":
                return own
        own = self.generate()
        self.primary_id = own.key_id
        return own

    def live_keys(self) -> list[OwnKey]:
        """Keys usable for trial decryption: active plus retired-within-grace."""
        return [k for k in self.keys.values() if k.status != "destroyed"]

    def retire(self, key_id: str, now: float) -> None:
        own = self.keys.get(key_id)
        if own is not None and own.status == "active":
            own.status = "retired"
            own.retired_at = now
        if self.primary_id == key_id:
            self.primary_id = None

    def prune(self, now: float, grace_seconds: float) -> int:
        """Destroy secret halves of keys retired longer than the grace window."""
        doomed = [
            k.key_id
            for k in self.keys.values()
            if k.status == "retired" and k.retired_at is not None
            and k.retired_at + grace_seconds <= now
        ]
        for key_id in doomed:
            del self.keys[key_id]
        return len(doomed)


@dataclass
class Contact:
    alias: str
    current_pub: bytes
    previous_pubs: list[bytes] = field(default_factory=list)
    rotation_state: str = "stable"  # stable | offered | completed
    own_key_id: str = ""
    pending_own_key_id: str | None = None
    last_rotation_at: str = ""  # ISO time of last applied inbound rotation


@dataclass
class StoredMessage:
    header_id: str
    direction: str  # sent | received
    to_addr: str
    from_addr: str
    date: str  # ISO seconds UTC
    subject: str
    body: bytes
    attachment: bytes | None
    body_hash: bytes
    attachment_hash: bytes | None
    receipt_nonce: bytes
    receipt_lock: bytes
    read: bool = False
    acked: bool = False
    control: bool = False
    purged_from_server: bool = False
    seq: int | None = None
    #: Sender side only: the secret whose reveal purges this message.
    receipt_preimage: bytes | None = None

    def rebuild_header(self) -> MessageHeader:
        return MessageHeader(
            to_addr=self.to_addr,
            from_addr=self.from_addr,
            date=_from_iso(self.date),
            subject=self.subject,
            body_hash=self.body_hash,
            attachment_hash=self.attachment_hash,
            receipt_nonce=self.receipt_nonce,
        )


@dataclass
class SyncReport:
    pages: int = 0
    attempted_decrypts: int = 0
    new_message_ids: list[str] = field(default_factory=list)
    skipped: int = 0
    quarantined: int = 0
    cursor: int = 0
    delivered_ids: list[str] = field(default_factory=list)


@dataclass
class ClientConfig:
    grace_seconds: float = DEFAULT_GRACE_SECONDS
    round_dates_to_hour: bool = False


class MailClient:
    """One identity's mail engine over one inbox server.

    All public methods are serialized by an internal lock; state is persisted
    after every mutation, so the in-memory object can be discarded at any
    point and rebuilt from disk.
    """

    def __init__(
        self,
        state_path: str | Path,
        passphrase: str,
        transport,
        address: str | None = None,
        config: ClientConfig | None = None,
    ) -> None:
        self.state_path = Path(state_path)
        self.transport = transport
        self.config = config or ClientConfig()
        self._lock = threading.RLock()
        self._passphrase = passphrase
        self._state_key: bytes | None = None
        self._salt: bytes | None = None

        self.address = address or ""
        self.cursor = 0
        self.skip_cache: set[str] = set()
        self.mailstore: dict[str, StoredMessage] = {}
        self.outbox: dict[str, StoredMessage] = {}
        self.pending_uploads: list[dict] = []
        self.keyring = Keyring()
        self.contacts: dict[str, Contact] = {}
        self.last_sync_at: str = ""

        if self.state_path.exists():
            self._load()
            if address is not None and address != self.address:
                raise StateFileError(
                    f"state file belongs to {self.address!r}, not {address!r}"
                )
        else:
            if not address:
                raise ValueError("a new client needs an address")
            self.state_path.parent.mkdir(parents=True, exist_ok=True, mode=0o700)
            self.keyring.ensure_primary()
            self.save()

    # -- persistence ---------------------------------------------------------

    def _derive_key(self, salt: bytes) -> bytes:
        return hashlib.scrypt(
            self._passphrase.encode("utf-8"),
            salt=salt,
            n=_SCRYPT_N,
            r=_SCRYPT_R,
            p=_SCRYPT_P,
            dklen=32,
        )

    def _encode_state(self) -> bytes:
        # Layout: one JSON document; bytes fields base64.  Sections: identity,
        # keyring, contacts, mailstore/outbox, sync cursor and caches.
        def msg_dict(m: StoredMessage) -> dict:
            return {
                "header_id": m.header_id,
                "direction": m.direction,
                "to": m.to_addr,
                "from": m.from_addr,
                "date": m.date,
                "subject": m.subject,
                "body": _b64(m.body),
                "attachment": _b64(m.attachment) if m.attachment is not None else None,
                "body_hash": m.body_hash.hex(),
                "attachment_hash": m.attachment_hash.hex() if m.attachment_hash else None,
                "receipt_nonce": m.receipt_nonce.hex(),
                "receipt_lock": m.receipt_lock.hex(),
                "read": m.read,
                "acked": m.acked,
                "control": m.control,
                "purged_from_server": m.purged_from_server,
                "seq": m.seq,
                "receipt_preimage": m.receipt_preimage.hex() if m.receipt_preimage else None,
            }

        doc = {
            "version": 1,
            "address": self.address,
            "cursor": self.cursor,
            "last_sync_at": self.last_sync_at,
            "skip_cache": sorted(self.skip_cache),
            "keyring": {
                "primary_id": self.keyring.primary_id,
                "keys": [
                    {
                        "key_id": k.key_id,
                        "public": _b64(k.keypair.public_part),
                        "secret": _b64(k.keypair.secret_part),
                        "created_at": k.keypair.created_at,
                        "status": k.status,
                        "retired_at": k.retired_at,
                    }
                    for k in self.keyring.keys.values()
                ],
            },
            "contacts": [
                {
                    "alias": c.alias,
                    "current_pub": _b64(c.current_pub),
                    "previous_pubs": [_b64(p) for p in c.previous_pubs],
                    "rotation_state": c.rotation_state,
                    "own_key_id": c.own_key_id,
                    "pending_own_key_id": c.pending_own_key_id,
                    "last_rotation_at": c.last_rotation_at,
                }
                for c in self.contacts.values()
            ],
            "mailstore": [msg_dict(m) for m in self.mailstore.values()],
            "outbox": [msg_dict(m) for m in self.outbox.values()],
            "pending_uploads": self.pending_uploads,
        }
        return json.dumps(doc, separators=(",", ":")).encode("utf-8")

    def _decode_state(self, raw: bytes) -> None:
        def msg_from(d: dict) -> StoredMessage:
            return StoredMessage(
                header_id=d["header_id"],
                direction=d["direction"],
                to_addr=d["to"],
                from_addr=d["from"],
                date=d["date"],
                subject=d["subject"],
                body=_unb64(d["body"]),
                attachment=_unb64(d["attachment"]) if d["attachment"] is not None else None,
                body_hash=bytes.fromhex(d["body_hash"]),
                attachment_hash=(
                    bytes.fromhex(d["attachment_hash"]) if d["attachment_hash"] else None
                ),
                receipt_nonce=bytes.fromhex(d["receipt_nonce"]),
                receipt_lock=bytes.fromhex(d["receipt_lock"]),
                read=d["read"],
                acked=d["acked"],
                control=d["control"],
                purged_from_server=d["purged_from_server"],
                seq=d["seq"],
                receipt_preimage=(
                    bytes.fromhex(d["receipt_preimage"]) if d.get("receipt_preimage") else None
                ),
            )

        doc = json.loads(raw.decode("utf-8"))
        self.address = doc["address"]
        self.cursor = doc["cursor"]
        self.last_sync_at = doc.get("last_sync_at", "")
        self.skip_cache = set(doc["skip_cache"])
        ring = Keyring()
        ring.primary_id = doc["keyring"]["primary_id"]
        for k in doc["keyring"]["keys"]:
            ring.keys[k["key_id"]] = OwnKey(
                key_id=k["key_id"],
                keypair=KeyPair(
                    public_part=_unb64(k["public"]),
                    secret_part=_unb64(k["secret"]),
                    created_at=k["created_at"],
                ),
                status=k["status"],
                retired_at=k["retired_at"],
            )
        self.keyring = ring
        self.contacts = {
            c["alias"]: Contact(
                alias=c["alias"],
                current_pub=_unb64(c["current_pub"]),
                previous_pubs=[_unb64(p) for p in c["previous_pubs"]],
                rotation_state=c["rotation_state"],
                own_key_id=c["own_key_id"],
                pending_own_key_id=c["pending_own_key_id"],
                last_rotation_at=c["last_rotation_at"],
            )
            for c in doc["contacts"]
        }
        self.mailstore = {d["header_id"]: msg_from(d) for d in doc["mailstore"]}
        self.outbox = {d["header_id"]: msg_from(d) for d in doc["outbox"]}
        self.pending_uploads = doc["pending_uploads"]

    def save(self) -> None:
        from cryptography.hazmat.primitives.ciphers.aead import ChaCha20Poly1305

        with self._lock:
            if self._salt is None:
                self._salt = os.urandom(16)
            if self._state_key is None:
                self._state_key = self._derive_key(self._salt)
            nonce = os.urandom(12)
            sealed = ChaCha20Poly1305(self._state_key).encrypt(
                nonce, self._encode_state(), _STATE_MAGIC
            )
            blob = _STATE_MAGIC + self._salt + nonce + sealed
            tmp = self.state_path.with_name(self.state_path.name + ".tmp")
            tmp.write_bytes(blob)
            tmp.replace(self.state_path)
            try:
                os.chmod(self.state_path, 0o600)
            except OSError:
                pass

    def _load(self) -> None:
        from cryptography.exceptions import InvalidTag
        from cryptography.hazmat.primitives.ciphers.aead import ChaCha20Poly1305

        blob = self.state_path.read_bytes()
        if len(blob) < len(_STATE_MAGIC) + 16 + 12 + 16 or not blob.startswith(_STATE_MAGIC):
            raise StateFileError("not a warp2 client state file")
        off = len(_STATE_MAGIC)
        self._salt = blob[off : off + 16]
        nonce = blob[off + 16 : off + 28]
        self._state_key = self._derive_key(self._salt)
        try:
            raw = ChaCha20Poly1305(self._state_key).decrypt(
                nonce, blob[off + 28 :], _STATE_MAGIC
            )
        except InvalidTag:
            raise StateFileError("cannot decrypt state: wrong passphrase or corrupt file") from None
        self._decode_state(raw)

    # -- contacts and identity -----------------------------------------------

    def identity_public_key(self) -> bytes:
        with self._lock:
            before = self.keyring.primary_id
            own = self.keyring.ensure_primary()
            if own.key_id != before:
                self.save()
            return own.keypair.public_part

    def import_contact(self, alias: str, public_key: bytes | str) -> Contact:
        """Register a peer from an out-of-band key exchange."""
        with self._lock:
            if alias in self.contacts:
                raise DuplicateAlias(f"contact {alias!r} already exists")
            if not alias or "\x00" in alias:
                raise ValueError("alias must be a non-empty string without NUL")
            if isinstance(public_key, str):
                pub = crypto.import_public_key(public_key)
            else:
                pub = public_key
                crypto.import_public_key(crypto.export_public_key(pub))
            contact = Contact(
                alias=alias,
                current_pub=pub,
                own_key_id=self.keyring.ensure_primary().key_id,
            )
            self.contacts[alias] = contact
            self.save()
            return contact

    def remove_contact(self, alias: str) -> None:
        with self._lock:
            if alias not in self.contacts:
                raise UnknownContact(alias)
            contact = self.contacts.pop(alias)
            self._release_own_key(contact.own_key_id)
            if contact.pending_own_key_id:
                self._release_own_key(contact.pending_own_key_id)
            self.save()

    def _release_own_key(self, key_id: str) -> None:
        """Retire an own key once nothing references it (contacts or primary)."""
        if not key_id or key_id == self.keyring.primary_id:
            return
        for c in self.contacts.values():
            if key_id in (c.own_key_id, c.pending_own_key_id):
                return
        self.keyring.retire(key_id, now=time.time())

    # -- sending ---------------------------------------------------------------

    def _now(self) -> datetime:
        dt = datetime.now(tz=timezone.utc).replace(microsecond=0)
        if self.config.round_dates_to_hour:
            dt = dt.replace(minute=0, second=0)
        return dt

    def send(
        self,
        to_alias: str,
        subject: str,
        body: bytes,
        attachment: bytes | None = None,
    ) -> str:
        """Compose and upload one message; returns its header id.

        If the server is unreachable the envelope is queued and retried on
        the next sync — check ``pending_uploads`` to see what is still local.
        """
        with self._lock:
            contact = self.contacts.get(to_alias)
            if contact is None:
                raise UnknownContact(to_alias)
            return self._send_to_key(
                contact, contact.current_pub, subject, body, attachment
            )

    def _send_to_key(
        self,
        contact: Contact,
        recipient_pub: bytes,
        subject: str,
        body: bytes,
        attachment: bytes | None,
        control: bool = False,
    ) -> str:
        date = self._now()
        env, receipt = compose_envelope(
            to_addr=contact.alias,
            from_addr=self.address,
            subject=subject,
            date=date,
            body=body,
            attachment=attachment,
            recipient_pub=recipient_pub,
        )
        header_id = crypto.sha256(env.header_ct).hex()
        record = StoredMessage(
            header_id=header_id,
            direction="sent",
            to_addr=contact.alias,
            from_addr=self.address,
            date=_iso(date),
            subject=subject,
            body=body,
            attachment=attachment,
            body_hash=crypto.sha256(env.body_ct),
            attachment_hash=(
                crypto.sha256(env.attachment_ct) if env.attachment_ct is not None else None
            ),
            # Senders keep the preimage itself, not the nonce: the nonce lives
            # inside the sealed header and is the recipient's to recover.
            receipt_nonce=b"\x00" * 16,
            receipt_lock=env.receipt_lock,
            receipt_preimage=receipt.preimage,
            control=control,
            read=True,
        )
        pending = {
            "header_id": header_id,
            "header_ct": _b64(env.header_ct),
            "body_ct": _b64(env.body_ct),
            "attachment_ct": _b64(env.attachment_ct) if env.attachment_ct is not None else None,
            "receipt_lock": env.receipt_lock.hex(),
        }
        self.pending_uploads.append(pending)
        self.outbox[header_id] = record
        self.save()

        # Store-and-forward: a failed upload stays queued and is retried on
        # the next sync, so the caller always gets a definite header id.
        try:
            self.transport.upload(
                env.header_ct, env.body_ct, env.attachment_ct, env.receipt_lock
            )
        except NetworkFailure:
            log.warning("upload failed; %s queued for retry", header_id[:12])
            return header_id
        self.pending_uploads = [
            p for p in self.pending_uploads if p["header_id"] != header_id
        ]
        self.save()
        return header_id

    def retry_pending_uploads(self) -> int:
        """Re-upload envelopes whose first upload never confirmed; idempotent."""
        with self._lock:
            done = []
            for p in self.pending_uploads:
                try:
                    self.transport.upload(
                        _unb64(p["header_ct"]),
                        _unb64(p["body_ct"]),
                        _unb64(p["attachment_ct"]) if p["attachment_ct"] else None,
                        bytes.fromhex(p["receipt_lock"]),
                    )
                except NetworkFailure:
                    continue
                done.append(p["header_id"])
            if done:
                self.pending_uploads = [
                    p for p in self.pending_uploads if p["header_id"] not in done
                ]
                self.save()
            return len(done)

    # -- receiving -------------------------------------------------------------

    def sync(self) -> SyncReport:
        """Page new headers, trial-decrypt, fetch and store our mail."""
        with self._lock:
            report = SyncReport()
            destroyed = self.keyring.prune(time.time(), self.config.grace_seconds)
            if destroyed:
                self.save()
            self.retry_pending_uploads()

            while True:
                entries, next_cursor = self.transport.list_headers(after=self.cursor)
                if not entries:
                    break
                report.pages += 1
                try:
                    self._process_page(entries, report)
                except NetworkFailure:
                    # Keep what this page already yielded, but do not advance
                    # the cursor past it; the next sync resumes here.
                    self.save()
                    raise
                self.cursor = max(self.cursor, next_cursor)
                self.save()

            self._probe_outbox_delivery(report)
            self.last_sync_at = _iso(datetime.now(tz=timezone.utc))
            report.cursor = self.cursor
            self.save()
            return report

    def _process_page(self, entries, report: SyncReport) -> None:
        for entry in entries:
            hid = entry.header_id.hex()
            if hid in self.mailstore or hid in self.outbox or hid in self.skip_cache:
                continue
            plain = None
            opened_with = None
            # Re-read the keyring per entry: applying a rotation mid-page adds
            # a fresh key that later traffic may already be sealed to.
            for own in self.keyring.live_keys():
                report.attempted_decrypts += 1
                plain = crypto.open_sealed(entry.header_ct, own.keypair)
                if plain is not None:
                    opened_with = own
                    break
            if plain is None:
                self.skip_cache.add(hid)
                report.skipped += 1
                continue
            try:
                self._receive(entry, plain, opened_with, report)
            except MalformedHeader as exc:
                log.warning("quarantined %s: %s", hid[:12], exc)
                self.skip_cache.add(hid)
                report.quarantined += 1

    def _receive(self, entry, plain: bytes, opened_with: OwnKey, report: SyncReport) -> None:
        hid = entry.header_id.hex()
        header = parse_header(plain)
        try:
            body_ct = self.transport.fetch_blob("body", entry.header_id)
            attachment_ct = (
                self.transport.fetch_blob("attachment", entry.header_id)
                if header.attachment_hash is not None
                else None
            )
        except BlobMissing:
            # Purged between listing and fetch; sender revoked it.
            log.info("message %s vanished before fetch", hid[:12])
            return
        try:
            body, attachment = self._verify(header, body_ct, attachment_ct, opened_with)
        except (HashMismatch, BlobDecryptFailure) as exc:
            log.warning("quarantined %s: %s", hid[:12], exc)
            self.skip_cache.add(hid)
            report.quarantined += 1
            return

        msg = StoredMessage(
            header_id=hid,
            direction="received",
            to_addr=header.to_addr,
            from_addr=header.from_addr,
            date=_iso(header.date),
            subject=header.subject,
            body=body,
            attachment=attachment,
            body_hash=header.body_hash,
            attachment_hash=header.attachment_hash,
            receipt_nonce=header.receipt_nonce,
            receipt_lock=crypto.sha256(crypto.sha256(plain)),
            seq=entry.seq,
        )
        if header.subject == ROTATE_SUBJECT:
            msg.control = True
            msg.read = True
            handled = self._apply_rotation(header, body)
            self.mailstore[hid] = msg
            if handled:
                # Best effort: a lost ack only delays the server-side purge.
                try:
                    self._ack_message(msg)
                except NetworkFailure:
                    log.warning("could not acknowledge rotation %s", hid[:12])
        else:
            self.mailstore[hid] = msg
        report.new_message_ids.append(hid)

    def _verify(self, header, body_ct, attachment_ct, opened_with: OwnKey):
        return verify_and_open(header, body_ct, attachment_ct, opened_with.keypair)

    def _probe_outbox_delivery(self, report: SyncReport) -> None:
        """A sent message disappearing from the pool means it was received."""
        for msg in self.outbox.values():
            if msg.purged_from_server or any(
                p["header_id"] == msg.header_id for p in self.pending_uploads
            ):
                continue
            try:
                self.transport.fetch_blob("body", bytes.fromhex(msg.header_id))
            except BlobMissing:
                msg.purged_from_server = True
                report.delivered_ids.append(msg.header_id)
            except NetworkFailure:
                return

    # -- receipts ---------------------------------------------------------------

    def acknowledge(self, header_id: str) -> bool:
        """Prove receipt: reveal the header-plaintext hash, purging the server copy."""
        with self._lock:
            msg = self.mailstore.get(header_id)
            if msg is None:
                raise NotInMailstore(header_id)
            purged = self._ack_message(msg)
            self.save()
            return purged

    def _ack_message(self, msg: StoredMessage) -> bool:
        # Recomputed from the stored header, not remembered from receive time:
        # proves the canonical encoding is deterministic end to end.
        plaintext = canonical_serialize(msg.rebuild_header())
        preimage = crypto.sha256(plaintext)
        purged = self.transport.acknowledge(preimage)
        if purged:
            msg.acked = True
        return purged

    # -- key rotation -------------------------------------------------------------

    def rotate_keys(self, alias: str) -> str:
        """Offer a fresh key to one contact; completes when their offer arrives."""
        with self._lock:
            contact = self.contacts.get(alias)
            if contact is None:
                raise UnknownContact(alias)
            if contact.rotation_state == "offered":
                raise RotationPending(f"rotation with {alias!r} already in flight")
            header_id = self._offer_rotation(contact)
            contact.rotation_state = "offered"
            self.save()
            return header_id

    def _offer_rotation(self, contact: Contact) -> str:
        new_key = self.keyring.generate()
        contact.pending_own_key_id = new_key.key_id
        payload = json.dumps(
            {
                "new_public_key": crypto.export_public_key(new_key.keypair.public_part),
                "effective_from": _iso(datetime.now(tz=timezone.utc)),
            }
        ).encode("utf-8")
        return self._send_to_key(
            contact, contact.current_pub, ROTATE_SUBJECT, payload, None, control=True
        )

    def _apply_rotation(self, header: MessageHeader, body: bytes) -> bool:
        contact = self.contacts.get(header.from_addr)
        if contact is None:
            log.warning("rotation offer from unknown sender %r ignored", header.from_addr)
            return False
        try:
            payload = json.loads(body.decode("utf-8"))
            new_pub = crypto.import_public_key(payload["new_public_key"])
            effective_from = payload["effective_from"]
            _from_iso(effective_from)
        except (ValueError, KeyError, crypto.InvalidPublicKey) as exc:
            log.warning("malformed rotation payload from %r: %s", header.from_addr, exc)
            return False

        # The pool is a single seq-ordered log, so offers from one peer can
        # never arrive out of order; anything matching a key we already
        # applied is a replay (tombstones make true replays unlistable anyway).
        if new_pub == contact.current_pub or new_pub in contact.previous_pubs:
            return True

        contact.previous_pubs.append(contact.current_pub)
        contact.current_pub = new_pub
        contact.last_rotation_at = effective_from

        if contact.rotation_state == "offered":
            self._complete_rotation(contact)
        else:
            # Peer initiated: reciprocate with our own fresh key, sealed to
            # their new one, then the handshake is complete on our side.
            self._offer_rotation(contact)
            self._complete_rotation(contact)
        return True

    def _complete_rotation(self, contact: Contact) -> None:
        old_id = contact.own_key_id
        contact.own_key_id = contact.pending_own_key_id or contact.own_key_id
        contact.pending_own_key_id = None
        contact.rotation_state = "completed"
        if self.keyring.primary_id == old_id:
            self.keyring.primary_id = None
        self._release_own_key(old_id)

    # -- views ---------------------------------------------------------------------

    def all_messages(self, include_control: bool = False) -> list[StoredMessage]:
        msgs = list(self.mailstore.values()) + list(self.outbox.values())
        if not include_control:
            msgs = [m for m in msgs if not m.control]
        return sorted(msgs, key=lambda m: (m.date, m.header_id))

    def get_message(self, header_id: str) -> StoredMessage:
        msg = self.mailstore.get(header_id) or self.outbox.get(header_id)
        if msg is None:
            raise NotInMailstore(header_id)
        return msg

    def mark_read(self, header_id: str) -> None:
        with self._lock:
            self.get_message(header_id).read = True
            self.save()

    def status(self) -> dict:
        return {
            "address": self.address,
            "cursor": self.cursor,
            "skip_cache_size": len(self.skip_cache),
            "mailstore_size": len(self.mailstore),
            "outbox_size": len(self.outbox),
            "pending_uploads": len(self.pending_uploads),
            "live_keys": len(self.keyring.live_keys()),
            "last_sync_at": self.last_sync_at,
            "identity_key": crypto.export_public_key(self.identity_public_key()),
        }
