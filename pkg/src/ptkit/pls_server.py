"""The Public Log Server.

Vets login-page registrations (certificate chain, challenge-response,
visual admission control), issues signed page timestamps, keeps an
append-only log, publishes its log identity, and answers screenshot
fallback queries from clients.
"""

from __future__ import annotations

import base64
import hashlib
import json
import os
import threading
import time
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Optional
from urllib.parse import urlsplit

import numpy as np
from cryptography.exceptions import InvalidSignature
from cryptography.hazmat.primitives.asymmetric.ed25519 import Ed25519PrivateKey
from fastapi import FastAPI, File, Form, Query, Request, UploadFile
from fastapi.responses import JSONResponse

from . import certs, spt, visual
from .certs import CertificateInvalid, DomainMismatch
from .config import Config
from .visual import DegenerateImage, EmbeddingStore, PageEmbedding, StoreEntry


class PlsError(Exception):
    pass


class RateLimited(PlsError):
    pass


class ChallengeInvalid(PlsError):
    pass


class ChallengeExpired(PlsError):
    pass


class SimilarityConflict(PlsError):
    pass


class ScreenshotRequired(PlsError):
    pass


_STATUS = {
    RateLimited: 429,
    ChallengeInvalid: 403,
    ChallengeExpired: 403,
    CertificateInvalid: 403,
    DomainMismatch: 403,
    SimilarityConflict: 409,
    DegenerateImage: 422,
    ScreenshotRequired: 400,
}


@dataclass
class LogEntry:
    sequence: int
    domain: str
    url: str
    url_hash: str
    content_hash: str
    spt: str
    logged_at: int

    def to_dict(self) -> dict:
        return {
            "sequence": self.sequence,
            "domain": self.domain,
            "url": self.url,
            "url_hash": self.url_hash,
            "content_hash": self.content_hash,
            "spt": self.spt,
            "logged_at": self.logged_at,
        }


class RateLimiter:
    """Sliding one-minute window per key."""

    def __init__(self, per_minute: int, clock: Callable[[], float] = time.time):
        self.per_minute = per_minute
        self.clock = clock
        self._hits: dict[str, list[float]] = {}
        self._lock = threading.Lock()

    def check(self, key: str) -> None:
        now = self.clock()
        with self._lock:
            hits = [t for t in self._hits.get(key, []) if now - t < 60.0]
            if len(hits) >= self.per_minute:
                self._hits[key] = hits
                raise RateLimited(f"rate limit exceeded for {key!r}")
            hits.append(now)
            self._hits[key] = hits


def url_host(url: str) -> str:
    host = urlsplit(url).hostname
    if not host:
        raise DomainMismatch(f"url {url!r} has no host")
    return host


class PlsState:
    """All server-side state: identity, nonce table, log, embedding store."""

    def __init__(self, config: Config, data_dir: str | Path,
                 roots: list | None = None,
                 peers: list[spt.LogIdentity] | None = None,
                 renderer: Optional[Callable[[str, str], np.ndarray]] = None,
                 clock: Callable[[], float] = time.time):
        self.config = config
        self.data_dir = Path(data_dir)
        self.data_dir.mkdir(parents=True, exist_ok=True)
        self.roots = roots or []
        self.peers = peers or []
        self.renderer = renderer
        self.clock = clock

        key_path = self.data_dir / "identity_key.pem"
        if key_path.exists():
            self.identity_key = certs.key_from_pem(key_path.read_bytes())
        else:
            self.identity_key = Ed25519PrivateKey.generate()
            key_path.write_text(certs.key_to_pem(self.identity_key))
        self.identity = spt.LogIdentity.from_signing_key(self.identity_key)

        self.store = EmbeddingStore(self.data_dir / "embeddings.jsonl")
        self._entries_path = self.data_dir / "entries.jsonl"
        self.entries: list[LogEntry] = []
        if self._entries_path.exists():
            for line in self._entries_path.read_text().splitlines():
                if line.strip():
                    self.entries.append(LogEntry(**json.loads(line)))

        self._write_lock = threading.Lock()
        self._nonces: dict[str, tuple[str, float]] = {}
        self._nonce_lock = threading.Lock()
        self.challenge_limiter = RateLimiter(config.challenge_rate_per_minute, clock)
        self.fallback_limiter = RateLimiter(config.fallback_rate_per_minute, clock)

    # -- challenge-response ---------------------------------------------------

    def issue_challenge(self, domain: str) -> dict:
        self.challenge_limiter.check(domain)
        nonce = base64.b64encode(os.urandom(32)).decode()
        expires_at = self.clock() + self.config.nonce_ttl_seconds
        with self._nonce_lock:
            self._sweep_nonces()
            self._nonces[nonce] = (domain, expires_at)
        return {"nonce": nonce, "expires_at": expires_at}

    def _sweep_nonces(self) -> None:
        now = self.clock()
        for key in [k for k, (_, exp) in self._nonces.items() if exp < now]:
            del self._nonces[key]

    def _consume_nonce(self, nonce: str, domain: str) -> None:
        with self._nonce_lock:
            record = self._nonces.pop(nonce, None)
        if record is None:
            raise ChallengeInvalid("unknown or already-used nonce")
        bound_domain, expires_at = record
        if expires_at < self.clock():
            raise ChallengeExpired("nonce expired")
        if bound_domain != domain:
            raise ChallengeInvalid("nonce bound to a different domain")

    # -- registration ---------------------------------------------------------

    def register(self, certificate_pem: str, signature_b64: str, nonce: str,
                 domain: str, url: str, html: str,
                 screenshot_png: bytes | None) -> str:
        self._consume_nonce(nonce, domain)

        cert = certs.cert_from_pem(certificate_pem)
        host = url_host(url)
        if host != domain:
            raise DomainMismatch(f"url host {host!r} is not the registering domain")
        certs.verify_chain(cert, self.roots, hostname=host)

        try:
            signature = base64.b64decode(signature_b64, validate=True)
            cert.public_key().verify(signature, base64.b64decode(nonce))
        except (ValueError, InvalidSignature) as exc:
            raise ChallengeInvalid(f"challenge signature invalid: {exc}") from exc

        if screenshot_png is not None:
            image = visual.png_bytes_to_array(screenshot_png)
        elif self.renderer is not None:
            image = self.renderer(url, html)
        else:
            raise ScreenshotRequired("no screenshot supplied and no renderer configured")
        embedding = visual.embed(image)

        verdict = visual.nearest_match(
            embedding, self.store, self.config.siamese_threshold, exclude_domain=domain
        )
        if verdict.matched:
            # Deliberately opaque: do not name the conflicting page.
            raise SimilarityConflict("page is visually similar to an already-logged page")

        now = int(self.clock())
        header = spt.create_spt(url, html, self.identity_key, now,
                                canonicalize=self.config.canonicalize_html)
        digest = spt.content_digest(html, canonicalize=self.config.canonicalize_html)
        entry = LogEntry(
            sequence=len(self.entries) + 1,
            domain=domain,
            url=url,
            url_hash=hashlib.sha256(url.encode()).hexdigest(),
            content_hash=digest.decode("ascii"),
            spt=header,
            logged_at=now,
        )
        with self._write_lock:
            self.entries.append(entry)
            with self._entries_path.open("a") as fh:
                fh.write(json.dumps(entry.to_dict()) + "\n")
            self.store.add(StoreEntry(domain=domain, url=url, embedding=embedding))
        return header

    # -- queries --------------------------------------------------------------

    def log_identities(self) -> list[dict]:
        return [self.identity.to_record()] + [p.to_record() for p in self.peers]

    def verify_fallback(self, url: str, screenshot_png: bytes, source: str) -> dict:
        self.fallback_limiter.check(source)
        embedding = visual.embed(visual.png_bytes_to_array(screenshot_png))
        verdict = visual.nearest_match(embedding, self.store, self.config.siamese_threshold)
        if not verdict.matched:
            return {"phishing": False, "matched_domain": None}
        phishing = verdict.nearest_domain != url_host(url)
        return {"phishing": phishing, "matched_domain": verdict.nearest_domain}

    def audit_dump(self, start: int = 1) -> list[dict]:
        return [e.to_dict() for e in self.entries if e.sequence >= start]


def create_app(state: PlsState) -> FastAPI:
    app = FastAPI(title="ptkit public log server")
    app.state.pls = state

    @app.exception_handler(PlsError)
    @app.exception_handler(CertificateInvalid)
    @app.exception_handler(DomainMismatch)
    @app.exception_handler(DegenerateImage)
    async def _error_handler(request: Request, exc: Exception):
        status = _STATUS.get(type(exc), 400)
        return JSONResponse(
            status_code=status,
            content={"error": type(exc).__name__, "detail": str(exc)},
        )

    @app.post("/register/challenge")
    async def register_challenge(body: dict):
        domain = body.get("domain", "")
        if not domain:
            return JSONResponse(status_code=400,
                                content={"error": "BadRequest", "detail": "domain required"})
        return state.issue_challenge(domain)

    @app.post("/register")
    async def register(
        certificate: str = Form(...),
        signature: str = Form(...),
        nonce: str = Form(...),
        domain: str = Form(...),
        url: str = Form(...),
        html: str = Form(...),
        screenshot: UploadFile | None = File(None),
    ):
        png = await screenshot.read() if screenshot is not None else None
        header = state.register(certificate, signature, nonce, domain, url, html, png)
        return {"spt": header}

    @app.get("/logs")
    async def logs():
        return state.log_identities()

    @app.post("/verify-screenshot")
    async def verify_screenshot(
        request: Request,
        url: str = Form(...),
        screenshot: UploadFile = File(...),
    ):
        source = request.client.host if request.client else "local"
        return state.verify_fallback(url, await screenshot.read(), source)

    @app.get("/audit")
    async def audit(start: int = Query(1, alias="from")):
        return {"entries": state.audit_dump(start)}

    return app
