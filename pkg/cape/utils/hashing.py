"""Canonical JSON and content hashing."""

import hashlib
import json
from typing import Any


def canonical_json(data: Any) -> str:
    """Serialize with sorted keys and no insignificant whitespace."""
    return json.dumps(data, sort_keys=True, separators=(",", ":"), ensure_ascii=True)


def content_hash(data: Any) -> str:
    """SHA-256 of the canonical JSON of ``data``, as a hex string."""
    return hashlib.sha256(canonical_json(data).encode("utf-8")).hexdigest()
