"""Message header schema, canonical 512-byte encoding, and envelope assembly.

A message is carried as two or three sealed blobs: a fixed-size header, a body,
and optionally one attachment.  The plaintext header lists the SHA-256 ids of
the *encrypted* body/attachment blobs, so the recipient can fetch and verify
them by content.  Every header plaintext is padded to exactly 512 bytes before
sealing, which makes every header ciphertext on the server the same length --
size leaks nothing about subject length or attachment presence.

The canonical encoding is a frozen wire format: `name=value` lines in fixed
field order, newline/backslash escaping in values, a 0x00 terminator, zero
padding to 512 bytes.  Determinism matters beyond interop: the delivery
receipt is the SHA-256 of this plaintext, recomputed independently by the
recipient, so both sides must serialize bit-identically.
"""

from __future__ import annotations

import os
from dataclasses import dataclass
from datetime import datetime, timezone

from . import crypto
from .crypto import KeyPair, SEAL_OVERHEAD, seal, sha256

#: Padded plaintext header size; the canonical encoding must fit in it.
HEADER_PLAINTEXT_SIZE = 512

#: Every header ciphertext is exactly this long.
HEADER_CT_SIZE = HEADER_PLAINTEXT_SIZE + SEAL_OVERHEAD

#: UTF-8 byte budget for the subject field.
MAX_SUBJECT_BYTES = 256

NONCE_SIZE = 16

_DATE_FMT = "%Y-%m-%dT%H:%M:%SZ"

# Canonical field order.  attachment_hash is omitted (not blank) when absent.
_FIELDS = ("to", "from", "date", "subject", "body_hash", "attachment_hash", "receipt_nonce")


class HeaderTooLarge(ValueError):
    """Canonical content exceeds the 512-byte padded frame."""


class MalformedHeader(ValueError):
    """Bytes are not a canonical warp2 header plaintext."""


class HashMismatch(ValueError):
    """A content blob does not match the hash its header promises."""


class BlobDecryptFailure(ValueError):
    """A blob matched its hash but would not decrypt; sender broke protocol."""


@dataclass
class MessageHeader:
    to_addr: str
    from_addr: str
    date: datetime
    subject: str
    body_hash: bytes
    attachment_hash: bytes | None
    receipt_nonce: bytes

    def __post_init__(self) -> None:
        if not self.to_addr or not self.from_addr:
            raise ValueError("to and from must be non-empty")
        # NUL is the frame terminator and has no escape in the canonical form.
        if any("\x00" in v for v in (self.to_addr, self.from_addr, self.subject)):
            raise ValueError("NUL is not allowed in header fields")
        if len(self.subject.encode("utf-8")) > MAX_SUBJECT_BYTES:
            raise ValueError(f"subject exceeds {MAX_SUBJECT_BYTES} UTF-8 bytes")
        if len(self.body_hash) != crypto.HASH_SIZE:
            raise ValueError("body_hash must be 32 bytes")
        if self.attachment_hash is not None and len(self.attachment_hash) != crypto.HASH_SIZE:
            raise ValueError("attachment_hash must be 32 bytes when present")
        if len(self.receipt_nonce) != NONCE_SIZE:
            raise ValueError(f"receipt_nonce must be {NONCE_SIZE} bytes")
        if self.date.tzinfo is None:
            self.date = self.date.replace(tzinfo=timezone.utc)
        self.date = self.date.astimezone(timezone.utc).replace(microsecond=0)


@dataclass
class Envelope:
    """The upload unit: sealed header/body/attachment plus the receipt lock."""

    header_ct: bytes
    body_ct: bytes
    attachment_ct: bytes | None
    receipt_lock: bytes


@dataclass
class ReceiptSecret:
    """Hash of the padded header plaintext; revealing it proves receipt."""

    preimage: bytes


def _escape(value: str) -> str:
    return value.replace("\\", "\\\\").replace("\n", "\\n")


def _unescape(value: str) -> str:
    out = []
    i = 0
    while i < len(value):
        ch = value[i]
        if ch == "\\":
            if i + 1 >= len(value):
                raise MalformedHeader("dangling escape in field value")
            nxt = value[i + 1]
            if nxt == "\\":
                out.append("\\")
            elif nxt == "n":
                out.append("\n")
            else:
                raise MalformedHeader(f"unknown escape \\{nxt}")
            i += 2
        else:
            out.append(ch)
            i += 1
    return "".join(out)


def _field_values(header: MessageHeader) -> dict[str, str]:
    values = {
        "to": _escape(header.to_addr),
        "from": _escape(header.from_addr),
        "date": header.date.strftime(_DATE_FMT),
        "subject": _escape(header.subject),
        "body_hash": header.body_hash.hex(),
        "receipt_nonce": header.receipt_nonce.hex(),
    }
    if header.attachment_hash is not None:
        values["attachment_hash"] = header.attachment_hash.hex()
    return values


def canonical_serialize(header: MessageHeader) -> bytes:
    """Encode a header to its frozen 512-byte canonical form."""
    values = _field_values(header)
    content = "".join(
        f"{name}={values[name]}\n" for name in _FIELDS if name in values
    ).encode("utf-8")
    if len(content) + 1 > HEADER_PLAINTEXT_SIZE:
        raise HeaderTooLarge(
            f"canonical content is {len(content)} bytes; limit is {HEADER_PLAINTEXT_SIZE - 1}"
        )
    return content + b"\x00" * (HEADER_PLAINTEXT_SIZE - len(content))


def parse_header(data: bytes) -> MessageHeader:
    """Decode a canonical 512-byte plaintext; strict inverse of canonical_serialize."""
    if len(data) != HEADER_PLAINTEXT_SIZE:
        raise MalformedHeader(f"header plaintext must be {HEADER_PLAINTEXT_SIZE} bytes")
    terminator = data.find(b"\x00")
    if terminator < 0:
        raise MalformedHeader("missing terminator")
    if data[terminator:].strip(b"\x00"):
        raise MalformedHeader("non-zero bytes in padding")
    content = data[:terminator]
    if not content.endswith(b"\n"):
        raise MalformedHeader("content must end with newline")

    try:
        text = content.decode("utf-8")
    except UnicodeDecodeError:
        raise MalformedHeader("content is not UTF-8") from None

    raw: dict[str, str] = {}
    order: list[str] = []
    for line in text.split("\n")[:-1]:
        name, sep, value = line.partition("=")
        if not sep:
            raise MalformedHeader(f"line without '=': {line!r}")
        if name not in _FIELDS:
            raise MalformedHeader(f"unknown field {name!r}")
        if name in raw:
            raise MalformedHeader(f"duplicate field {name!r}")
        raw[name] = value
        order.append(name)

    expected_order = [f for f in _FIELDS if f in raw]
    if order != expected_order:
        raise MalformedHeader("fields out of canonical order")
    missing = {f for f in _FIELDS if f != "attachment_hash"} - raw.keys()
    if missing:
        raise MalformedHeader(f"missing fields: {sorted(missing)}")

    try:
        date = datetime.strptime(raw["date"], _DATE_FMT).replace(tzinfo=timezone.utc)
    except ValueError:
        raise MalformedHeader(f"bad date {raw['date']!r}") from None

    def hex_field(name: str, size: int) -> bytes:
        value = raw[name]
        if len(value) != size * 2 or value != value.lower():
            raise MalformedHeader(f"{name} must be {size * 2} lowercase hex chars")
        try:
            return bytes.fromhex(value)
        except ValueError:
            raise MalformedHeader(f"{name} is not hex") from None

    try:
        header = MessageHeader(
            to_addr=_unescape(raw["to"]),
            from_addr=_unescape(raw["from"]),
            date=date,
            subject=_unescape(raw["subject"]),
            body_hash=hex_field("body_hash", crypto.HASH_SIZE),
            attachment_hash=(
                hex_field("attachment_hash", crypto.HASH_SIZE)
                if "attachment_hash" in raw
                else None
            ),
            receipt_nonce=hex_field("receipt_nonce", NONCE_SIZE),
        )
    except MalformedHeader:
        raise
    except ValueError as exc:
        raise MalformedHeader(str(exc)) from None

    # The canonical form is injective; anything that does not re-serialize to
    # the input is a forgery of the encoding (e.g. uppercase hex, odd spacing).
    if canonical_serialize(header) != data:
        raise MalformedHeader("input is not in canonical form")
    return header


def receipt_lock_for(plaintext: bytes) -> bytes:
    """Server-visible lock for a padded header plaintext: H(H(plaintext)).

    The recipient reveals H(plaintext) to prove receipt; the server verifies by
    hashing once.  Public store values are never valid receipts.
    """
    return sha256(sha256(plaintext))


def compose_envelope(
    to_addr: str,
    from_addr: str,
    subject: str,
    date: datetime,
    body: bytes,
    attachment: bytes | None,
    recipient_pub: bytes,
) -> tuple[Envelope, ReceiptSecret]:
    """Build the full upload unit for one message.

    Seals body (and attachment), embeds their ciphertext hashes in the header,
    seals the padded header, and derives the receipt lock.  The returned
    ReceiptSecret is sender-side bookkeeping; the recipient recomputes the same
    preimage from the decrypted header.
    """
    if not body:
        raise ValueError("body must be non-empty")
    if attachment is not None and not attachment:
        raise ValueError("attachment, when given, must be non-empty")

    body_ct = seal(body, recipient_pub)
    attachment_ct = seal(attachment, recipient_pub) if attachment is not None else None
    header = MessageHeader(
        to_addr=to_addr,
        from_addr=from_addr,
        date=date,
        subject=subject,
        body_hash=sha256(body_ct),
        attachment_hash=sha256(attachment_ct) if attachment_ct is not None else None,
        receipt_nonce=os.urandom(NONCE_SIZE),
    )
    plaintext = canonical_serialize(header)
    envelope = Envelope(
        header_ct=seal(plaintext, recipient_pub),
        body_ct=body_ct,
        attachment_ct=attachment_ct,
        receipt_lock=receipt_lock_for(plaintext),
    )
    return envelope, ReceiptSecret(preimage=sha256(plaintext))


def verify_and_open(
    header: MessageHeader,
    body_ct: bytes,
    attachment_ct: bytes | None,
    keypair: KeyPair,
) -> tuple[bytes, bytes | None]:
    """Check fetched blobs against the header's hashes, then decrypt them.

    Hash checks run before any decryption so substituted or corrupted blobs are
    rejected without touching key material.
    """
    if sha256(body_ct) != header.body_hash:
        raise HashMismatch("body blob does not match header body_hash")
    if header.attachment_hash is not None:
        if attachment_ct is None:
            raise HashMismatch("header promises an attachment but none was supplied")
        if sha256(attachment_ct) != header.attachment_hash:
            raise HashMismatch("attachment blob does not match header attachment_hash")
    elif attachment_ct is not None:
        raise HashMismatch("attachment supplied for a header without one")

    body = crypto.open_sealed(body_ct, keypair)
    if body is None:
        raise BlobDecryptFailure("body blob matched its hash but failed decryption")
    attachment = None
    if attachment_ct is not None:
        attachment = crypto.open_sealed(attachment_ct, keypair)
        if attachment is None:
            raise BlobDecryptFailure("attachment blob matched its hash but failed decryption")
    return body, attachment
