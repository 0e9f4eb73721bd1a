"""Canonical JSON encoding and content hashing.

Every persisted artifact (graph snapshots, cache entries, reports) is encoded
through this module, so equal values always produce identical bytes: keys are
sorted, whitespace is dropped, and NaN/Infinity are rejected.
"""

from __future__ import annotations

import hashlib
import json
from typing import Any


def canonical_bytes(value: Any) -> bytes:
    """Encode *value* as canonical JSON (sorted keys, compact, UTF-8)."""
    return json.dumps(
        value,
        sort_keys=True,
        separators=(",", ":"),
        ensure_ascii=False,
        allow_nan=False,
    ).encode("utf-8")


def canonical_str(value: Any) -> str:
    return canonical_bytes(value).decode("utf-8")


def parse_canonical(data: bytes | str) -> Any:
    return json.loads(data)


def is_canonical(data: bytes) -> bool:
    try:
        return canonical_bytes(json.loads(data)) == data
    except (ValueError, TypeError):
        return False


def sha256_hex(data: bytes | str) -> str:
    if isinstance(data, str):
        data = data.encode("utf-8")
    return hashlib.sha256(data).hexdigest()


def value_hash(value: Any) -> str:
    """256-bit content hash of a JSON-serializable value, hex-encoded."""
    return sha256_hex(canonical_bytes(value))
