"""Signed Page Timestamp codec.

An SPT ties a URL and the textual content of a page to a log identity at
a point in time.  On the wire it is base64 over a fixed 101-byte layout:

    version (1) | timestamp (4, big-endian) | log_id (32) | signature (64)

The signature covers SHA-256 of a 133-byte record: version, timestamp,
then the SHA-256 hex digests of the URL and of the canonicalized page
text (64 ASCII bytes each).  Signatures are Ed25519.
"""

from __future__ import annotations

import base64
import binascii
import hashlib
import json
import re
import struct
from dataclasses import dataclass
from html.parser import HTMLParser
from pathlib import Path

from cryptography.exceptions import InvalidSignature
from cryptography.hazmat.primitives import serialization
from cryptography.hazmat.primitives.asymmetric import ed25519

SPT_VERSION = 1
HEADER_LEN = 101  # 1 + 4 + 32 + 64
RECORD_LEN = 133  # 1 + 4 + 64 + 64
SPT_HEADER_NAME = "SPT-Header"

_SKIP_ELEMENTS = frozenset({"script", "style"})
_WS = re.compile(r"\s+")


class SptError(Exception):
    pass


class MalformedHeader(SptError):
    pass


class TimestampOverflow(SptError):
    pass


class _TextExtractor(HTMLParser):
    def __init__(self):
        super().__init__(convert_charrefs=True)
        self.chunks: list[str] = []
        self._skip_depth = 0

    def handle_starttag(self, tag, attrs):
        if tag in _SKIP_ELEMENTS:
            self._skip_depth += 1

    def handle_endtag(self, tag):
        if tag in _SKIP_ELEMENTS and self._skip_depth:
            self._skip_depth -= 1

    def handle_data(self, data):
        if self._skip_depth:
            return
        text = _WS.sub(" ", data).strip()
        if text:
            self.chunks.append(text)


def canonical_text(html: bytes | str) -> bytes:
    """Extract the page's text nodes in document order.

    Each node is whitespace-collapsed and trimmed; empty nodes are
    dropped; script/style contents are excluded.  Nodes are joined by a
    single newline and UTF-8 encoded.  Total over arbitrary byte input:
    anything unparseable degrades to being treated as text.
    """
    if isinstance(html, bytes):
        html = html.decode("utf-8", errors="replace")
    parser = _TextExtractor()
    try:
        parser.feed(html)
        parser.close()
    except Exception:
        return _WS.sub(" ", html).strip().encode("utf-8")
    return "\n".join(parser.chunks).encode("utf-8")


def _hash_hex(data: bytes) -> bytes:
    return hashlib.sha256(data).hexdigest().encode("ascii")


def pack_record(version: int, timestamp: int, url_hash: bytes, content_hash: bytes) -> bytes:
    """The 133-byte signing input: version, timestamp, then both hex digests."""
    if len(url_hash) != 64 or len(content_hash) != 64:
        raise ValueError("hash fields must be 64 hex-ASCII bytes")
    return struct.pack(">BI", version, timestamp) + url_hash + content_hash


def content_digest(html: bytes | str, canonicalize: bool = True) -> bytes:
    """Hex digest of the page content; canonical text by default, raw bytes for strict mode."""
    if canonicalize:
        return _hash_hex(canonical_text(html))
    if isinstance(html, str):
        html = html.encode("utf-8")
    return _hash_hex(html)


@dataclass(frozen=True)
class SptHeader:
    version: int
    timestamp: int
    log_id: bytes
    signature: bytes

    def encode(self) -> str:
        if not 0 <= self.timestamp < 2**32:
            raise TimestampOverflow(f"timestamp {self.timestamp} does not fit in 4 bytes")
        raw = struct.pack(">BI", self.version, self.timestamp) + self.log_id + self.signature
        assert len(raw) == HEADER_LEN
        return base64.b64encode(raw).decode("ascii")


def decode_spt(header: str) -> SptHeader:
    """Decode a base64 SPT header into its four fields.

    Field boundaries are the fixed slices [0:1], [1:5], [5:37], [37:101].
    """
    try:
        raw = base64.b64decode(header, validate=True)
    except (binascii.Error, ValueError) as exc:
        raise MalformedHeader(f"not valid base64: {exc}") from exc
    if len(raw) != HEADER_LEN:
        raise MalformedHeader(f"decoded length {len(raw)}, expected {HEADER_LEN}")
    return SptHeader(
        version=raw[0],
        timestamp=struct.unpack(">I", raw[1:5])[0],
        log_id=raw[5:37],
        signature=raw[37:101],
    )


def derive_log_id(public_key: ed25519.Ed25519PublicKey) -> bytes:
    """32-byte log identifier: SHA-256 over the DER-encoded public key."""
    der = public_key.public_bytes(
        encoding=serialization.Encoding.DER,
        format=serialization.PublicFormat.SubjectPublicKeyInfo,
    )
    return hashlib.sha256(der).digest()


@dataclass(frozen=True)
class LogIdentity:
    """A log server identity as published in a trusted-log list."""

    log_id: bytes
    public_key: ed25519.Ed25519PublicKey

    @classmethod
    def from_public_key(cls, public_key: ed25519.Ed25519PublicKey) -> "LogIdentity":
        return cls(log_id=derive_log_id(public_key), public_key=public_key)

    @classmethod
    def from_signing_key(cls, signing_key: ed25519.Ed25519PrivateKey) -> "LogIdentity":
        return cls.from_public_key(signing_key.public_key())

    def to_record(self) -> dict:
        pem = self.public_key.public_bytes(
            encoding=serialization.Encoding.PEM,
            format=serialization.PublicFormat.SubjectPublicKeyInfo,
        )
        return {
            "log_id": base64.b64encode(self.log_id).decode("ascii"),
            "pub_key": pem.decode("ascii"),
        }

    @classmethod
    def from_record(cls, record: dict) -> "LogIdentity":
        key = serialization.load_pem_public_key(record["pub_key"].encode("ascii"))
        if not isinstance(key, ed25519.Ed25519PublicKey):
            raise ValueError("trusted-log pub_key is not an Ed25519 key")
        log_id = base64.b64decode(record["log_id"])
        if log_id != derive_log_id(key):
            raise ValueError("log_id does not match its public key")
        return cls(log_id=log_id, public_key=key)


def load_trusted_logs(path: str | Path) -> list[LogIdentity]:
    records = json.loads(Path(path).read_text())
    return [LogIdentity.from_record(r) for r in records]


def save_trusted_logs(identities: list[LogIdentity], path: str | Path) -> None:
    Path(path).write_text(json.dumps([i.to_record() for i in identities], indent=2) + "\n")


def create_spt(
    url: str,
    html: bytes | str,
    identity_key: ed25519.Ed25519PrivateKey,
    now: int,
    canonicalize: bool = True,
) -> str:
    """Create a base64 SPT for a page under the given log signing key."""
    if not 0 <= now < 2**32:
        raise TimestampOverflow(f"timestamp {now} does not fit in 4 bytes")
    record = pack_record(
        SPT_VERSION,
        now,
        _hash_hex(url.encode("utf-8")),
        content_digest(html, canonicalize=canonicalize),
    )
    signature = identity_key.sign(hashlib.sha256(record).digest())
    return SptHeader(
        version=SPT_VERSION,
        timestamp=now,
        log_id=derive_log_id(identity_key.public_key()),
        signature=signature,
    ).encode()


def verify_spt(
    header: str,
    url: str,
    html: bytes | str,
    trusted_logs: list[LogIdentity],
    canonicalize: bool = True,
) -> bool:
    """True iff the header was issued by a trusted log over exactly this url/content.

    Unknown log id, bad signature, or a malformed header all return
    False; verification never raises.
    """
    try:
        decoded = decode_spt(header)
    except MalformedHeader:
        return False
    identity = next((t for t in trusted_logs if t.log_id == decoded.log_id), None)
    if identity is None:
        return False
    record = pack_record(
        decoded.version,
        decoded.timestamp,
        _hash_hex(url.encode("utf-8")),
        content_digest(html, canonicalize=canonicalize),
    )
    try:
        identity.public_key.verify(decoded.signature, hashlib.sha256(record).digest())
    except InvalidSignature:
        return False
    return True
