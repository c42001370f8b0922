"""Runtime configuration shared by the log server, client, and CLI.

Values come from (in increasing precedence) built-in defaults, an
optional JSON config file, and PTKIT_* environment variables.
"""

from __future__ import annotations

import dataclasses
import json
import os
from dataclasses import dataclass
from pathlib import Path

# Distance cutoff calibrated once against the bundled 20-brand corpus
# (see tests/golden/visual_golden.json) and frozen here as the default.
DEFAULT_SIAMESE_THRESHOLD = 0.7181268807017993

ENV_PREFIX = "PTKIT_"


@dataclass
class Config:
    pls_endpoint: str = "http://127.0.0.1:8787"
    siamese_threshold: float = DEFAULT_SIAMESE_THRESHOLD
    request_timeout: float = 5.0
    nonce_ttl_seconds: float = 300.0
    challenge_rate_per_minute: int = 100
    fallback_rate_per_minute: int = 600
    canonicalize_html: bool = True
    fail_closed: bool = True
    data_dir: str = "pls-data"

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)


def _coerce(value: str, target_type: type):
    if target_type is bool:
        return value.strip().lower() in ("1", "true", "yes", "on")
    return target_type(value)


def load_config(path: str | Path | None = None, env: dict | None = None) -> Config:
    """Build a Config from defaults, an optional JSON file, and env overrides."""
    env = os.environ if env is None else env
    values: dict = {}
    if path is not None:
        loaded = json.loads(Path(path).read_text())
        if not isinstance(loaded, dict):
            raise ValueError("config file must contain a JSON object")
        values.update(loaded)

    fields = {f.name: f for f in dataclasses.fields(Config)}
    unknown = set(values) - set(fields)
    if unknown:
        raise ValueError(f"unknown config keys: {sorted(unknown)}")
    for name, field in fields.items():
        env_key = ENV_PREFIX + name.upper()
        if env_key in env:
            values[name] = _coerce(env[env_key], type(field.default))
    return Config(**values)
