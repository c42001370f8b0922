"""Client-side render gate and domain-owner tooling.

The gate decides whether a fetched page may render: non-login pages
pass straight through; login pages must present a verifiable SPT
header or survive the server-side screenshot fallback.  Also here:
the registration client used by domain owners, a demo origin server
that attaches SPT headers (with adversarial modes for testing), and a
small HTTP app exposing the gate to the browser extension.
"""

from __future__ import annotations

import base64
import logging
import threading
from dataclasses import dataclass, field
from functools import partial
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from pathlib import Path
from typing import Callable, Optional

import httpx
from cryptography.hazmat.primitives.asymmetric.ed25519 import Ed25519PrivateKey
from fastapi import FastAPI

from . import spt
from .config import Config
from .detector import DetectionConfig, detect_login
from .pls_server import url_host
from .spt import SPT_HEADER_NAME, LogIdentity, MalformedHeader

logger = logging.getLogger(__name__)

RENDER = "RENDER"
BLOCK = "BLOCK"

BLOCK_REASONS = frozenset(
    {"NO_SPT_HEADER", "UNKNOWN_LOG_ID", "FALLBACK_PHISHING", "FALLBACK_UNREACHABLE"}
)


class NetworkError(Exception):
    pass


class RegistrationRejected(Exception):
    def __init__(self, error: str, detail: str = ""):
        super().__init__(f"{error}: {detail}")
        self.error = error
        self.detail = detail


@dataclass
class FetchedPage:
    url: str
    status: int = 200
    headers: list[tuple[str, str]] = field(default_factory=list)
    html: str = ""
    screenshot: Optional[bytes] = None

    def header(self, name: str) -> Optional[str]:
        """First value for a header name, case-insensitively."""
        matches = [v for k, v in self.headers if k.lower() == name.lower()]
        if len(matches) > 1:
            logger.warning("duplicate %s header; using first value", name)
        return matches[0] if matches else None


@dataclass(frozen=True)
class RenderDecision:
    action: str  # RENDER | BLOCK
    reason: str
    detail: str = ""

    def to_dict(self) -> dict:
        return {"action": self.action, "reason": self.reason, "detail": self.detail}


class PlsClient:
    """Thin HTTP client for the public log server API."""

    def __init__(self, base_url: str, timeout: float = 5.0,
                 http_client: httpx.Client | None = None):
        self.base_url = base_url.rstrip("/")
        self._owns_client = http_client is None
        self._client = http_client or httpx.Client(
            base_url=self.base_url, timeout=timeout
        )

    def close(self) -> None:
        if self._owns_client:
            self._client.close()

    def _request(self, method: str, path: str, **kwargs) -> httpx.Response:
        try:
            return self._client.request(method, path, **kwargs)
        except httpx.HTTPError as exc:
            raise NetworkError(f"{method} {path}: {exc}") from exc

    def get_logs(self) -> list[LogIdentity]:
        resp = self._request("GET", "/logs")
        resp.raise_for_status()
        return [LogIdentity.from_record(rec) for rec in resp.json()]

    def challenge(self, domain: str) -> dict:
        resp = self._request("POST", "/register/challenge", json={"domain": domain})
        self._raise_rejection(resp)
        return resp.json()

    def register(self, certificate_pem: str, signature_b64: str, nonce: str,
                 domain: str, url: str, html: str,
                 screenshot_png: bytes | None = None) -> str:
        data = {
            "certificate": certificate_pem,
            "signature": signature_b64,
            "nonce": nonce,
            "domain": domain,
            "url": url,
            "html": html,
        }
        files = {}
        if screenshot_png is not None:
            files["screenshot"] = ("screenshot.png", screenshot_png, "image/png")
        resp = self._request("POST", "/register", data=data, files=files or None)
        self._raise_rejection(resp)
        return resp.json()["spt"]

    def verify_screenshot(self, url: str, screenshot_png: bytes) -> dict:
        resp = self._request(
            "POST", "/verify-screenshot",
            data={"url": url},
            files={"screenshot": ("screenshot.png", screenshot_png, "image/png")},
        )
        self._raise_rejection(resp)
        return resp.json()

    def audit(self, start: int = 1) -> list[dict]:
        resp = self._request("GET", "/audit", params={"from": start})
        resp.raise_for_status()
        return resp.json()["entries"]

    @staticmethod
    def _raise_rejection(resp: httpx.Response) -> None:
        if resp.status_code >= 400:
            try:
                body = resp.json()
            except ValueError:
                body = {"error": f"HTTP{resp.status_code}", "detail": resp.text}
            raise RegistrationRejected(body.get("error", "unknown"), body.get("detail", ""))


def gate(page: FetchedPage, trusted_logs: list[LogIdentity], pls: PlsClient,
         config: Config | None = None,
         detection: DetectionConfig | None = None,
         capture: Optional[Callable[[FetchedPage], Optional[bytes]]] = None) -> RenderDecision:
    """Decide whether a fetched page may render.

    Non-login pages render unconditionally.  Login pages must carry a
    verifiable SPT header; otherwise the screenshot fallback asks the
    log server, blocking on a phishing verdict and (by default) when
    the server cannot be reached.
    """
    config = config or Config()
    report = detect_login(page.html, page.url, detection or DetectionConfig())
    if not report.is_login:
        return RenderDecision(RENDER, "NOT_LOGIN", f"score {report.score}")

    header = page.header(SPT_HEADER_NAME)
    if header is None:
        return RenderDecision(BLOCK, "NO_SPT_HEADER", "login page served without an SPT header")

    try:
        decoded = spt.decode_spt(header)
    except MalformedHeader:
        decoded = None  # garbage header: treated like a failed verification below
    if decoded is not None and not any(decoded.log_id == ident.log_id
                                       for ident in trusted_logs):
        return RenderDecision(BLOCK, "UNKNOWN_LOG_ID",
                              "SPT issued by a log outside the trusted list")

    if spt.verify_spt(header, page.url, page.html, trusted_logs,
                      canonicalize=config.canonicalize_html):
        return RenderDecision(RENDER, "SPT_VERIFIED", "signature valid")

    screenshot = page.screenshot
    if screenshot is None and capture is not None:
        screenshot = capture(page)
    if screenshot is None:
        return _unreachable(config, "no screenshot available for fallback verification")
    try:
        result = pls.verify_screenshot(page.url, screenshot)
    except (NetworkError, RegistrationRejected) as exc:
        return _unreachable(config, str(exc))
    if result["phishing"]:
        return RenderDecision(BLOCK, "FALLBACK_PHISHING",
                              "screenshot matches a page logged by another domain")
    return RenderDecision(RENDER, "FALLBACK_SAFE",
                          "log server did not identify the page as phishing")


def _unreachable(config: Config, detail: str) -> RenderDecision:
    if config.fail_closed:
        return RenderDecision(BLOCK, "FALLBACK_UNREACHABLE", detail)
    return RenderDecision(RENDER, "FALLBACK_SAFE", f"fail-open: {detail}")


def fetch_page(url: str, client: httpx.Client | None = None) -> FetchedPage:
    """Fetch a URL, following redirects; the final URL is recorded."""
    own = client is None
    client = client or httpx.Client(follow_redirects=True, timeout=10.0)
    try:
        resp = client.get(url)
    except httpx.HTTPError as exc:
        raise NetworkError(f"GET {url}: {exc}") from exc
    finally:
        if own:
            client.close()
    return FetchedPage(
        url=str(resp.url),
        status=resp.status_code,
        headers=list(resp.headers.items()),
        html=resp.text,
    )


def owner_register(pls: PlsClient, certificate_pem: str,
                   signing_key: Ed25519PrivateKey, url: str, html: str,
                   screenshot_png: bytes | None = None) -> str:
    """Run the owner side of the logging phase: challenge, sign, register."""
    domain = url_host(url)
    challenge = pls.challenge(domain)
    nonce = challenge["nonce"]
    signature = signing_key.sign(base64.b64decode(nonce))
    return pls.register(
        certificate_pem, base64.b64encode(signature).decode(), nonce,
        domain, url, html, screenshot_png,
    )


DEMO_MODES = ("normal", "strip", "spoof")


class _DemoHandler(BaseHTTPRequestHandler):
    server_version = "ptkit-demo"

    def __init__(self, *args, site_root: Path, spt_store: dict[str, str],
                 mode: str, forge_key: Ed25519PrivateKey, **kwargs):
        self.site_root = site_root
        self.spt_store = spt_store
        self.mode = mode
        self.forge_key = forge_key
        super().__init__(*args, **kwargs)

    def log_message(self, fmt, *args):
        logger.debug("demo server: " + fmt, *args)

    def do_GET(self):
        name = self.path.lstrip("/") or "index.html"
        target = (self.site_root / name).resolve()
        if not target.is_file() or self.site_root not in target.parents:
            self.send_error(404)
            return
        body = target.read_bytes()
        self.send_response(200)
        if target.suffix in (".html", ".htm"):
            self.send_header("Content-Type", "text/html; charset=utf-8")
            header = self._spt_for(name, body)
            if header is not None:
                self.send_header(SPT_HEADER_NAME, header)
        else:
            self.send_header("Content-Type", "application/octet-stream")
        self.send_header("Content-Length", str(len(body)))
        self.end_headers()
        self.wfile.write(body)

    def _spt_for(self, name: str, body: bytes) -> Optional[str]:
        if name not in self.spt_store:
            return None
        if self.mode == "strip":
            return None
        if self.mode == "spoof":
            # Forge with a throwaway key the client has never heard of.
            host, port = self.server.server_address[:2]
            url = f"http://{host}:{port}/{name}"
            return spt.create_spt(url, body, self.forge_key, 0)
        return self.spt_store[name]


class DemoServer:
    """Static origin that serves site_root and attaches stored SPT headers."""

    def __init__(self, site_root: str | Path, spt_store: dict[str, str],
                 mode: str = "normal", host: str = "127.0.0.1", port: int = 0):
        if mode not in DEMO_MODES:
            raise ValueError(f"mode must be one of {DEMO_MODES}")
        handler = partial(
            _DemoHandler,
            site_root=Path(site_root).resolve(),
            spt_store=dict(spt_store),
            mode=mode,
            forge_key=Ed25519PrivateKey.generate(),
        )
        self._httpd = ThreadingHTTPServer((host, port), handler)
        self._thread: threading.Thread | None = None

    @property
    def base_url(self) -> str:
        host, port = self._httpd.server_address[:2]
        return f"http://{host}:{port}"

    def start(self) -> "DemoServer":
        self._thread = threading.Thread(target=self._httpd.serve_forever, daemon=True)
        self._thread.start()
        return self

    def serve_forever(self) -> None:
        self._httpd.serve_forever()

    def stop(self) -> None:
        self._httpd.shutdown()
        self._httpd.server_close()
        if self._thread:
            self._thread.join(timeout=5)


def create_gate_app(trusted_logs: list[LogIdentity], pls: PlsClient,
                    config: Config | None = None,
                    detection: DetectionConfig | None = None) -> FastAPI:
    """Local verification endpoint consumed by the browser extension."""
    config = config or Config()
    app = FastAPI(title="ptkit gate")

    @app.post("/gate")
    async def gate_endpoint(body: dict):
        headers = [(k, v) for k, v in (body.get("headers") or {}).items()]
        screenshot = None
        if body.get("screenshot_b64"):
            screenshot = base64.b64decode(body["screenshot_b64"])
        page = FetchedPage(
            url=body.get("url", ""),
            headers=headers,
            html=body.get("html", ""),
            screenshot=screenshot,
        )
        return gate(page, trusted_logs, pls, config, detection).to_dict()

    @app.get("/health")
    async def health():
        return {"ok": True}

    return app
