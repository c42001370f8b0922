"""Tests for the client render gate, demo origin, and owner tooling."""

import base64
import socket

import pytest
from cryptography.hazmat.primitives.asymmetric.ed25519 import Ed25519PrivateKey
from fastapi.testclient import TestClient

from corpus_util import brand_names, load_brand
from ptkit import certs, spt, visual
from ptkit.client import (
    BLOCK_REASONS,
    DemoServer,
    FetchedPage,
    NetworkError,
    PlsClient,
    RenderDecision,
    create_gate_app,
    fetch_page,
    gate,
    owner_register,
)
from ptkit.config import Config
from ptkit.pls_server import PlsState, create_app
from test_server import LOGIN_HTML, png_bytes

NON_LOGIN_HTML = "<html><body><h1>Weather</h1><p>Sunny tomorrow.</p></body></html>"


@pytest.fixture
def identity_key():
    return Ed25519PrivateKey.generate()


@pytest.fixture
def trusted(identity_key):
    return [spt.LogIdentity.from_signing_key(identity_key)]


class FakePls:
    """Stands in for PlsClient in gate unit tests."""

    def __init__(self, result=None, error=None):
        self.result = result or {"phishing": False, "matched_domain": None}
        self.error = error
        self.calls = []

    def verify_screenshot(self, url, screenshot):
        self.calls.append(url)
        if self.error:
            raise self.error
        return self.result


def login_page(url="https://acme.example/login", headers=None, screenshot=None):
    return FetchedPage(url=url, headers=headers or [], html=LOGIN_HTML,
                       screenshot=screenshot)


# --- FetchedPage -------------------------------------------------------------


def test_header_lookup_case_insensitive():
    page = FetchedPage(url="https://x/", headers=[("spt-header", "abc")])
    assert page.header("SPT-Header") == "abc"
    assert page.header("Missing") is None


def test_duplicate_header_first_wins():
    page = FetchedPage(url="https://x/",
                       headers=[("SPT-Header", "first"), ("SPT-Header", "second")])
    assert page.header("SPT-Header") == "first"


# --- gate --------------------------------------------------------------------


def test_gate_non_login_renders(trusted):
    page = FetchedPage(url="https://news.example/", html=NON_LOGIN_HTML)
    decision = gate(page, trusted, FakePls())
    assert (decision.action, decision.reason) == ("RENDER", "NOT_LOGIN")


def test_gate_non_login_ignores_headers(trusted):
    # Non-interference: a non-login page renders whatever its headers say.
    page = FetchedPage(url="https://news.example/", html=NON_LOGIN_HTML,
                       headers=[("SPT-Header", "garbage")])
    assert gate(page, trusted, FakePls()).reason == "NOT_LOGIN"


def test_gate_missing_header_blocks(trusted):
    decision = gate(login_page(), trusted, FakePls())
    assert (decision.action, decision.reason) == ("BLOCK", "NO_SPT_HEADER")


def test_gate_valid_spt_renders(identity_key, trusted):
    url = "https://acme.example/login"
    header = spt.create_spt(url, LOGIN_HTML, identity_key, 1_700_000_000)
    decision = gate(login_page(url, headers=[("SPT-Header", header)]),
                    trusted, FakePls())
    assert (decision.action, decision.reason) == ("RENDER", "SPT_VERIFIED")


def test_gate_unknown_log_blocks_without_fallback(trusted):
    url = "https://acme.example/login"
    rogue = Ed25519PrivateKey.generate()
    header = spt.create_spt(url, LOGIN_HTML, rogue, 1_700_000_000)
    pls = FakePls()
    decision = gate(login_page(url, headers=[("SPT-Header", header)]), trusted, pls)
    assert (decision.action, decision.reason) == ("BLOCK", "UNKNOWN_LOG_ID")
    assert pls.calls == []  # no fallback round trip for an untrusted log


def stale_page(identity_key, screenshot=None):
    """Login page whose SPT covers older content (known log, bad hash)."""
    url = "https://acme.example/login"
    header = spt.create_spt(url, LOGIN_HTML + "<p>old</p>", identity_key,
                            1_700_000_000)
    return login_page(url, headers=[("SPT-Header", header)], screenshot=screenshot)


def test_gate_fallback_phishing_blocks(identity_key, trusted):
    pls = FakePls(result={"phishing": True, "matched_domain": "bank.example"})
    decision = gate(stale_page(identity_key, screenshot=b"png"), trusted, pls)
    assert (decision.action, decision.reason) == ("BLOCK", "FALLBACK_PHISHING")
    assert pls.calls == ["https://acme.example/login"]


def test_gate_fallback_safe_renders(identity_key, trusted):
    pls = FakePls(result={"phishing": False, "matched_domain": None})
    decision = gate(stale_page(identity_key, screenshot=b"png"), trusted, pls)
    assert (decision.action, decision.reason) == ("RENDER", "FALLBACK_SAFE")


def test_gate_malformed_header_goes_to_fallback(trusted):
    pls = FakePls()
    page = login_page(headers=[("SPT-Header", "not base64!!")], screenshot=b"png")
    decision = gate(page, trusted, pls)
    assert decision.reason == "FALLBACK_SAFE"
    assert pls.calls  # fallback was consulted


def test_gate_unreachable_fails_closed(identity_key, trusted):
    pls = FakePls(error=NetworkError("connection refused"))
    decision = gate(stale_page(identity_key, screenshot=b"png"), trusted, pls)
    assert (decision.action, decision.reason) == ("BLOCK", "FALLBACK_UNREACHABLE")


def test_gate_unreachable_fail_open_configurable(identity_key, trusted):
    pls = FakePls(error=NetworkError("connection refused"))
    decision = gate(stale_page(identity_key, screenshot=b"png"), trusted, pls,
                    Config(fail_closed=False))
    assert (decision.action, decision.reason) == ("RENDER", "FALLBACK_SAFE")


def test_gate_no_screenshot_fails_closed(identity_key, trusted):
    decision = gate(stale_page(identity_key), trusted, FakePls())
    assert (decision.action, decision.reason) == ("BLOCK", "FALLBACK_UNREACHABLE")


def test_gate_capture_callback_used(identity_key, trusted):
    captured = []

    def capture(page):
        captured.append(page.url)
        return b"png"

    decision = gate(stale_page(identity_key), trusted, FakePls(), capture=capture)
    assert decision.reason == "FALLBACK_SAFE"
    assert captured == ["https://acme.example/login"]


def test_block_iff_blocking_reason():
    for reason in ("NOT_LOGIN", "SPT_VERIFIED", "NO_SPT_HEADER", "UNKNOWN_LOG_ID",
                   "FALLBACK_PHISHING", "FALLBACK_SAFE", "FALLBACK_UNREACHABLE"):
        action = "BLOCK" if reason in BLOCK_REASONS else "RENDER"
        decision = RenderDecision(action, reason)
        assert (decision.action == "BLOCK") == (decision.reason in BLOCK_REASONS)


# --- demo server and fetch_page ----------------------------------------------


@pytest.fixture
def site(tmp_path, identity_key):
    root = tmp_path / "site"
    root.mkdir()
    (root / "login.html").write_text(LOGIN_HTML)
    (root / "about.html").write_text(NON_LOGIN_HTML)
    (root / "logo.bin").write_bytes(b"\x89binary")
    return root


def run_demo(site, store, mode="normal"):
    server = DemoServer(site, store, mode=mode).start()
    return server


def free_port() -> int:
    with socket.socket() as sock:
        sock.bind(("127.0.0.1", 0))
        return sock.getsockname()[1]


def test_demo_serves_spt_header(site, identity_key):
    port = free_port()
    url = f"http://127.0.0.1:{port}/login.html"
    header = spt.create_spt(url, LOGIN_HTML, identity_key, 1_700_000_000)
    server = DemoServer(site, {"login.html": header}, port=port).start()
    try:
        page = fetch_page(url)
        assert page.status == 200
        assert page.header("SPT-Header") == header
        assert page.html == LOGIN_HTML
    finally:
        server.stop()


def test_demo_unprotected_page_has_no_header(site):
    server = run_demo(site, {})
    try:
        page = fetch_page(f"{server.base_url}/about.html")
        assert page.header("SPT-Header") is None
    finally:
        server.stop()


def test_demo_static_file_has_no_header(site):
    server = run_demo(site, {"logo.bin": "whatever"})
    try:
        page = fetch_page(f"{server.base_url}/logo.bin")
        assert page.header("SPT-Header") is None
    finally:
        server.stop()


def test_demo_404(site):
    server = run_demo(site, {})
    try:
        assert fetch_page(f"{server.base_url}/missing.html").status == 404
    finally:
        server.stop()


def test_demo_strip_mode_omits_header(site):
    server = run_demo(site, {"login.html": "stored-spt"}, mode="strip")
    try:
        page = fetch_page(f"{server.base_url}/login.html")
        assert page.header("SPT-Header") is None
    finally:
        server.stop()


def test_demo_spoof_mode_forges_unknown_log(site, trusted):
    server = run_demo(site, {"login.html": "stored-spt"}, mode="spoof")
    try:
        page = fetch_page(f"{server.base_url}/login.html")
        header = page.header("SPT-Header")
        assert header is not None and header != "stored-spt"
        decoded = spt.decode_spt(header)
        assert all(decoded.log_id != ident.log_id for ident in trusted)
    finally:
        server.stop()


def test_fetch_page_network_error():
    with pytest.raises(NetworkError):
        fetch_page("http://127.0.0.1:1/void")


# --- owner registration through the HTTP API ---------------------------------


@pytest.fixture
def pls_stack(tmp_path):
    ca_key, ca_cert = certs.generate_ca()
    state = PlsState(Config(), tmp_path / "pls", roots=[ca_cert])
    test_client = TestClient(create_app(state))
    pls = PlsClient("http://testserver", http_client=test_client)
    return state, pls, (ca_key, ca_cert)


def test_owner_register_round_trip(pls_stack):
    state, pls, (ca_key, ca_cert) = pls_stack
    key, cert = certs.issue_certificate(ca_key, ca_cert, ["acme.example"])
    header = owner_register(pls, certs.cert_to_pem(cert), key,
                            "https://acme.example/login", LOGIN_HTML,
                            png_bytes(load_brand(brand_names()[0])))
    assert spt.verify_spt(header, "https://acme.example/login", LOGIN_HTML,
                          [state.identity])
    assert pls.get_logs()[0].log_id == state.identity.log_id


def test_gate_end_to_end_against_real_pls(pls_stack):
    state, pls, (ca_key, ca_cert) = pls_stack
    key, cert = certs.issue_certificate(ca_key, ca_cert, ["acme.example"])
    brand = load_brand(brand_names()[0])
    url = "https://acme.example/login"
    header = owner_register(pls, certs.cert_to_pem(cert), key, url,
                            LOGIN_HTML, png_bytes(brand))
    trusted = pls.get_logs()

    # happy path
    page = login_page(url, headers=[("SPT-Header", header)])
    assert gate(page, trusted, pls).reason == "SPT_VERIFIED"

    # phisher replays the stolen header on its own host: the url hash no
    # longer matches, and the fallback recognizes the cloned visuals
    clone = FetchedPage(url="https://evil.example/login", html=LOGIN_HTML,
                        headers=[("SPT-Header", header)],
                        screenshot=png_bytes(brand))
    assert gate(clone, trusted, pls).reason == "FALLBACK_PHISHING"

    # stale content but the screenshot matches the registered domain itself
    shifted = visual.augment(brand, visual.AugmentationSpec.shift(8, 6))
    own = FetchedPage(url=url, html=LOGIN_HTML + "<p>new</p>",
                      headers=[("SPT-Header", header)],
                      screenshot=png_bytes(shifted))
    assert gate(own, trusted, pls).reason == "FALLBACK_SAFE"


# --- gate HTTP app (extension backend) ---------------------------------------


def test_gate_app_endpoint(identity_key, trusted):
    app = create_gate_app(trusted, FakePls())
    http = TestClient(app)
    url = "https://acme.example/login"
    header = spt.create_spt(url, LOGIN_HTML, identity_key, 1_700_000_000)
    resp = http.post("/gate", json={
        "url": url,
        "html": LOGIN_HTML,
        "headers": {"SPT-Header": header},
    })
    assert resp.json()["action"] == "RENDER"
    assert resp.json()["reason"] == "SPT_VERIFIED"

    resp = http.post("/gate", json={"url": url, "html": LOGIN_HTML, "headers": {}})
    assert resp.json()["reason"] == "NO_SPT_HEADER"

    resp = http.post("/gate", json={"url": "https://n.example/",
                                    "html": NON_LOGIN_HTML, "headers": {}})
    assert resp.json()["reason"] == "NOT_LOGIN"
    assert http.get("/health").json() == {"ok": True}


def test_gate_app_accepts_screenshot(identity_key, trusted):
    pls = FakePls(result={"phishing": True, "matched_domain": "bank.example"})
    app = create_gate_app(trusted, pls)
    http = TestClient(app)
    page = stale_page(identity_key)
    resp = http.post("/gate", json={
        "url": page.url,
        "html": page.html,
        "headers": dict(page.headers),
        "screenshot_b64": base64.b64encode(b"png").decode(),
    })
    assert resp.json()["reason"] == "FALLBACK_PHISHING"
