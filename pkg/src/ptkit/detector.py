"""Weighted-score login page detection.

A page earns points from four identifier families: credential keywords
in its visible text and attribute values (+10 each, capped), login-ish
tokens in the URL (+30 once), a submit control (+15), and credential
input fields (+60 per field).  A score strictly above the threshold
classifies the page as a login page.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass, field
from html.parser import HTMLParser
from pathlib import Path

# Keyword list shipped verbatim; matching is case-sensitive, which is why
# variants like "login"/"Login" both appear.
DEFAULT_CONTENT_KEYWORDS = (
    "username", "password", "login", "signin", "sign-in", "log in", "log-in",
    "authenticate", "credentials", "account", "identity", "user", "email",
    "e-mail", "passcode", "customer number", "pin", "secret code",
    "authentication code", "security code", "passphrase", "account number",
    "membership number", "social security number", "authorization code",
    "login code", "secure login", "unique identifier", "login id",
    "login name", "login details", "login information", "login credentials",
    "login data", "login token", "login key", "userid", "forgot", "Log in",
    "Login", "Email", "Username", "Sign in", "signed in", "Phone", "phone",
)

DEFAULT_URL_KEYWORDS = ("signin", "signup", "login", "log-in", "sign-in", "sign-up")

INPUT_NAME_VALUES = ("username", "userid", "email")
INPUT_TYPE_VALUES = ("email", "password")
INPUT_PLACEHOLDER_VALUES = ("username", "email", "password")


@dataclass(frozen=True)
class DetectionConfig:
    content_keywords: tuple[str, ...] = DEFAULT_CONTENT_KEYWORDS
    content_keyword_weight: int = 10
    content_keyword_cap: int = 30
    url_keywords: tuple[str, ...] = DEFAULT_URL_KEYWORDS
    url_weight: int = 30
    submit_weight: int = 15
    input_field_weight: int = 60
    login_threshold: int = 75

    def __post_init__(self):
        weights = (
            self.content_keyword_weight, self.content_keyword_cap,
            self.url_weight, self.submit_weight, self.input_field_weight,
        )
        if any(w < 0 for w in weights):
            raise ValueError("weights must be non-negative")
        if self.login_threshold <= 0:
            raise ValueError("login_threshold must be positive")

    @classmethod
    def from_file(cls, path: str | Path) -> "DetectionConfig":
        data = json.loads(Path(path).read_text())
        for key in ("content_keywords", "url_keywords"):
            if key in data:
                data[key] = tuple(data[key])
        return cls(**data)


@dataclass(frozen=True)
class Contribution:
    kind: str  # keyword | url | submit | input
    token: str
    weight: int


@dataclass
class DetectionReport:
    score: int
    contributions: list[Contribution]
    keyword_capped: bool
    threshold: int

    @property
    def is_login(self) -> bool:
        return self.score > self.threshold

    def to_dict(self) -> dict:
        return {
            "score": self.score,
            "is_login": self.is_login,
            "threshold": self.threshold,
            "keyword_capped": self.keyword_capped,
            "contributions": [
                {"kind": c.kind, "token": c.token, "weight": c.weight}
                for c in self.contributions
            ],
        }


_SKIP = frozenset({"script", "style"})
_WS = re.compile(r"\s+")


class _PageScanner(HTMLParser):
    """Collects visible text, attribute values, inputs, and submit controls."""

    def __init__(self):
        super().__init__(convert_charrefs=True)
        self.text_chunks: list[str] = []
        self.attr_values: list[str] = []
        self.inputs: list[dict[str, str]] = []
        self.has_submit = False
        self._skip_depth = 0
        self._form_depth = 0

    def handle_starttag(self, tag, attrs):
        if tag in _SKIP:
            self._skip_depth += 1
            return
        attr_map = {k: (v or "") for k, v in attrs}
        self.attr_values.extend(v for v in attr_map.values() if v)
        if tag == "form":
            self._form_depth += 1
        elif tag == "input":
            self.inputs.append(attr_map)
            if attr_map.get("type", "").lower() == "submit":
                self.has_submit = True
        elif tag == "button":
            if attr_map.get("type", "").lower() == "submit" or self._form_depth > 0:
                self.has_submit = True

    def handle_endtag(self, tag):
        if tag in _SKIP:
            if self._skip_depth:
                self._skip_depth -= 1
        elif tag == "form" and self._form_depth:
            self._form_depth -= 1

    def handle_data(self, data):
        if self._skip_depth:
            return
        text = _WS.sub(" ", data).strip()
        if text:
            self.text_chunks.append(text)


def _input_match_token(attrs: dict[str, str]) -> str | None:
    name = attrs.get("name", "").lower()
    if name in INPUT_NAME_VALUES:
        return f'name="{name}"'
    itype = attrs.get("type", "").lower()
    if itype in INPUT_TYPE_VALUES:
        return f'type="{itype}"'
    placeholder = attrs.get("placeholder", "").lower()
    for token in INPUT_PLACEHOLDER_VALUES:
        if token in placeholder:
            return f'placeholder~"{token}"'
    return None


def detect_login(html: bytes | str, url: str, config: DetectionConfig | None = None) -> DetectionReport:
    """Score a document plus its URL against the weighted identifier list."""
    config = config or DetectionConfig()
    if isinstance(html, bytes):
        html = html.decode("utf-8", errors="replace")

    scanner = _PageScanner()
    parse_ok = True
    try:
        scanner.feed(html)
        scanner.close()
    except Exception:
        parse_ok = False

    if parse_ok:
        haystack = "\n".join(scanner.text_chunks + scanner.attr_values)
    else:
        haystack = html  # degraded mode: text-only keyword matching

    contributions: list[Contribution] = []
    keyword_total = 0
    keyword_capped = False
    for keyword in config.content_keywords:
        if keyword in haystack:
            grant = min(config.content_keyword_weight, config.content_keyword_cap - keyword_total)
            if grant < config.content_keyword_weight:
                keyword_capped = True
            keyword_total += grant
            contributions.append(Contribution("keyword", keyword, grant))

    score = keyword_total
    for keyword in config.url_keywords:
        if keyword in url:
            score += config.url_weight
            contributions.append(Contribution("url", keyword, config.url_weight))
            break

    if parse_ok:
        if scanner.has_submit:
            score += config.submit_weight
            contributions.append(Contribution("submit", "submit control", config.submit_weight))
        for attrs in scanner.inputs:
            token = _input_match_token(attrs)
            if token is not None:
                score += config.input_field_weight
                contributions.append(Contribution("input", token, config.input_field_weight))

    return DetectionReport(
        score=score,
        contributions=contributions,
        keyword_capped=keyword_capped,
        threshold=config.login_threshold,
    )


def explain(report: DetectionReport) -> str:
    """Human-readable breakdown: one line per identifier family hit, then the verdict."""
    lines = []
    keywords = [c for c in report.contributions if c.kind == "keyword"]
    if keywords:
        total = sum(c.weight for c in keywords)
        names = ", ".join(c.token for c in keywords)
        suffix = " (capped)" if report.keyword_capped else ""
        lines.append(f"keywords{suffix} [{names}]: +{total}")
    for c in report.contributions:
        if c.kind != "keyword":
            lines.append(f"{c.kind} {c.token}: +{c.weight}")
    cmp = ">" if report.is_login else "≤"
    verdict = "login page" if report.is_login else "not a login page"
    lines.append(f"score {report.score} {cmp} {report.threshold}: {verdict}")
    return "\n".join(lines)
