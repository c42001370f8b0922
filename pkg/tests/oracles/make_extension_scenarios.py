"""Freezes the five reference gate scenarios for the extension parity tests.

Runs the real registration + gate pipeline against an in-process log
server and records each scenario's inputs together with the decision
the Python gate produced.  The extension test suite replays these and
must reach the same allow/block outcome.
Output: frontend/tests/fixtures/scenarios.json
"""

import base64
import io
import json
import sys
from pathlib import Path

import numpy as np
from PIL import Image
from fastapi.testclient import TestClient

HERE = Path(__file__).resolve().parent
sys.path.insert(0, str(HERE.parent))
from corpus_util import brand_names, load_brand  # noqa: E402

from ptkit import certs, visual  # noqa: E402
from ptkit.client import FetchedPage, PlsClient, gate, owner_register  # noqa: E402
from ptkit.config import Config  # noqa: E402
from ptkit.pls_server import PlsState, create_app  # noqa: E402

OUT = HERE.parent.parent / "frontend" / "tests" / "fixtures" / "scenarios.json"

LOGIN_HTML = """<html><body><form action="/session" method="post">
<h1>Sign in</h1>
<input name="username" type="text">
<input name="pass" type="password">
<button type="submit">Login</button>
</form></body></html>"""

ABOUT_HTML = "<html><body><h1>Weather</h1><p>Sunny tomorrow.</p></body></html>"


def png_b64(image: np.ndarray) -> str:
    buf = io.BytesIO()
    Image.fromarray(np.clip(np.round(image), 0, 255).astype(np.uint8)).save(
        buf, format="PNG")
    return base64.b64encode(buf.getvalue()).decode()


def main(tmp_dir: Path) -> None:
    ca_key, ca_cert = certs.generate_ca()
    state = PlsState(Config(), tmp_dir, roots=[ca_cert])
    pls = PlsClient("http://testserver", http_client=TestClient(create_app(state)))

    brand = load_brand(brand_names()[0])
    url = "https://acme.example/login"
    key, cert = certs.issue_certificate(ca_key, ca_cert, ["acme.example"])
    header = owner_register(pls, certs.cert_to_pem(cert), key, url, LOGIN_HTML,
                            base64.b64decode(png_b64(brand)))
    trusted = pls.get_logs()

    shifted = visual.augment(brand, visual.AugmentationSpec.shift(8, 6))
    scenarios = [
        {
            "name": "non_login_page_loads",
            "url": "https://news.example/",
            "html": ABOUT_HTML,
            "headers": {},
            "screenshot_b64": None,
            "calls_gate": False,
        },
        {
            "name": "login_without_header_blocked",
            "url": url,
            "html": LOGIN_HTML,
            "headers": {},
            "screenshot_b64": None,
            "calls_gate": True,
        },
        {
            "name": "verified_login_loads",
            "url": url,
            "html": LOGIN_HTML,
            "headers": {"SPT-Header": header},
            "screenshot_b64": None,
            "calls_gate": True,
        },
        {
            "name": "unverified_model_phishing_blocked",
            "url": "https://evil.example/login",
            "html": LOGIN_HTML,
            "headers": {"SPT-Header": header},
            "screenshot_b64": png_b64(brand),
            "calls_gate": True,
        },
        {
            "name": "unverified_model_clean_loads",
            "url": url,
            "html": LOGIN_HTML + "<p>updated</p>",
            "headers": {"SPT-Header": header},
            "screenshot_b64": png_b64(shifted),
            "calls_gate": True,
        },
    ]

    for scenario in scenarios:
        screenshot = (base64.b64decode(scenario["screenshot_b64"])
                      if scenario["screenshot_b64"] else None)
        page = FetchedPage(
            url=scenario["url"],
            headers=list(scenario["headers"].items()),
            html=scenario["html"],
            screenshot=screenshot,
        )
        decision = gate(page, trusted, pls)
        scenario["gate_response"] = decision.to_dict()
        scenario["expected_action"] = decision.action
        scenario["expected_reason"] = decision.reason

    OUT.parent.mkdir(parents=True, exist_ok=True)
    OUT.write_text(json.dumps(scenarios, indent=2) + "\n")
    print(f"wrote {len(scenarios)} scenarios to {OUT}")
    for s in scenarios:
        print(f"  {s['name']}: {s['expected_action']}/{s['expected_reason']}")


if __name__ == "__main__":
    import tempfile

    with tempfile.TemporaryDirectory() as tmp:
        main(Path(tmp))
