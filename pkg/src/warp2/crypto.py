"""Hashing and anonymous hybrid public-key encryption.

The sealing scheme is ephemeral-static X25519 + HKDF-SHA256 + ChaCha20-Poly1305:

    seal(m, pk)  =  eph_pub(32 bytes) || chacha20poly1305(m)(len(m)+16 bytes)

The symmetric key is derived from the shared secret with the ephemeral and
recipient public keys mixed into the KDF, and the ephemeral public key is bound
as AEAD associated data.  A fresh ephemeral key per message makes the fixed
nonce safe.  Nothing in the ciphertext names the recipient: the ephemeral key
is random per message and everything after it is AEAD output, so an observer
holding two ciphertexts cannot tell whether they are sealed to the same key.

Decryption failure is the *normal* case in this protocol (every client trial
decrypts every header on the shared inbox), so open_sealed() reports failure by
returning None instead of raising.
"""

from __future__ import annotations

import base64
import hashlib
import hmac
import time
from dataclasses import dataclass, field

from cryptography.exceptions import InvalidTag
from cryptography.hazmat.primitives.asymmetric.x25519 import (
    X25519PrivateKey,
    X25519PublicKey,
)
from cryptography.hazmat.primitives.ciphers.aead import ChaCha20Poly1305

#: Raw X25519 key size.
KEY_SIZE = 32

#: Bytes added by seal(): ephemeral public key + Poly1305 tag.
SEAL_OVERHEAD = 32 + 16

#: SHA-256 digest size; every content identifier in the protocol is one of these.
HASH_SIZE = 32

_HKDF_INFO = b"warp2-seal-v1"
_ZERO_NONCE = b"\x00" * 12


class InvalidPublicKey(ValueError):
    """Raised when key bytes do not form a usable public key."""


def sha256(data: bytes) -> bytes:
    """SHA-256 digest of data, as 32 raw bytes."""
    return hashlib.sha256(data).digest()


def hash_to_hex(digest: bytes) -> str:
    """Render a 32-byte digest as 64 lowercase hex chars (no prefix)."""
    if len(digest) != HASH_SIZE:
        raise ValueError(f"digest must be {HASH_SIZE} bytes, got {len(digest)}")
    return digest.hex()


def hash_from_hex(text: str) -> bytes:
    """Parse the hex rendering produced by hash_to_hex."""
    if len(text) != HASH_SIZE * 2 or text.lower() != text:
        raise ValueError("digest hex must be 64 lowercase hex chars")
    try:
        digest = bytes.fromhex(text)
    except ValueError:
        raise ValueError("digest hex must be 64 lowercase hex chars") from None
    return digest


@dataclass
class KeyPair:
    """An X25519 key pair plus its creation time (unix seconds)."""

    public_part: bytes
    secret_part: bytes
    created_at: float = field(default_factory=time.time)

    def __post_init__(self) -> None:
        if len(self.public_part) != KEY_SIZE or len(self.secret_part) != KEY_SIZE:
            raise ValueError("key parts must be 32 raw bytes each")


def generate_keypair() -> KeyPair:
    """Generate a fresh key pair from OS entropy."""
    secret = X25519PrivateKey.generate()
    return KeyPair(
        public_part=secret.public_key().public_bytes_raw(),
        secret_part=secret.private_bytes_raw(),
    )


def export_public_key(public_part: bytes) -> str:
    """Serialize a public key for text transport: base64 of length-prefixed raw bytes."""
    if len(public_part) != KEY_SIZE:
        raise InvalidPublicKey(f"public key must be {KEY_SIZE} bytes")
    return base64.b64encode(bytes([len(public_part)]) + public_part).decode("ascii")


def import_public_key(text: str) -> bytes:
    """Inverse of export_public_key; validates the key parses."""
    try:
        raw = base64.b64decode(text.strip(), validate=True)
    except Exception:
        raise InvalidPublicKey("not valid base64") from None
    if len(raw) < 1 or raw[0] != len(raw) - 1 or raw[0] != KEY_SIZE:
        raise InvalidPublicKey("bad length prefix for public key")
    key = raw[1:]
    try:
        X25519PublicKey.from_public_bytes(key)
    except Exception:
        raise InvalidPublicKey("bytes do not form an X25519 public key") from None
    return key


def _derive_key(shared: bytes, eph_pub: bytes, recipient_pub: bytes) -> bytes:
    # HKDF-SHA256 extract+expand for a single 32-byte output block.
    # Salt binds the derived key to this (ephemeral, recipient) pair so the
    # ciphertext commits to its recipient without naming it.
    prk = hmac.new(eph_pub + recipient_pub, shared, hashlib.sha256).digest()
    return hmac.new(prk, _HKDF_INFO + b"\x01", hashlib.sha256).digest()


def seal(plaintext: bytes, recipient_pub: bytes) -> bytes:
    """Encrypt plaintext so only the holder of the matching secret key can read it.

    Randomized: two seals of the same plaintext differ.  Output length is
    len(plaintext) + SEAL_OVERHEAD regardless of recipient.
    """
    if len(recipient_pub) != KEY_SIZE:
        raise InvalidPublicKey(f"public key must be {KEY_SIZE} bytes")
    try:
        recipient = X25519PublicKey.from_public_bytes(recipient_pub)
    except Exception:
        raise InvalidPublicKey("bytes do not form an X25519 public key") from None

    eph_secret = X25519PrivateKey.generate()
    eph_pub = eph_secret.public_key().public_bytes_raw()
    try:
        shared = eph_secret.exchange(recipient)
    except ValueError:
        raise InvalidPublicKey("public key yields a degenerate shared secret") from None
    key = _derive_key(shared, eph_pub, recipient_pub)
    ct = ChaCha20Poly1305(key).encrypt(_ZERO_NONCE, plaintext, eph_pub)
    return eph_pub + ct


def open_sealed(ciphertext: bytes, keypair: KeyPair) -> bytes | None:
    """Try to decrypt a sealed ciphertext with one key pair.

    Returns the plaintext on success, None on any failure (wrong key, corrupted
    or garbage bytes).  Never raises on untrusted input; this is the trial
    decryption hot path.
    """
    if len(ciphertext) < SEAL_OVERHEAD:
        return None
    eph_pub = ciphertext[:KEY_SIZE]
    body = ciphertext[KEY_SIZE:]
    try:
        secret = X25519PrivateKey.from_private_bytes(keypair.secret_part)
        shared = secret.exchange(X25519PublicKey.from_public_bytes(eph_pub))
    except ValueError:
        return None
    key = _derive_key(shared, eph_pub, keypair.public_part)
    try:
        return ChaCha20Poly1305(key).decrypt(_ZERO_NONCE, body, eph_pub)
    except InvalidTag:
        return None
