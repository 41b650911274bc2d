"""Shared helpers: canonical JSON, hashing, seed derivation."""

from __future__ import annotations

import hashlib
import json


def canonical_json(obj) -> str:
    """Serialize with sorted keys and no whitespace, for hashing and stable artifacts."""
    return json.dumps(obj, sort_keys=True, separators=(",", ":"))


def sha256_hex(text: str) -> str:
    return hashlib.sha256(text.encode("utf-8")).hexdigest()


def derive_seed(*parts) -> int:
    """Stable non-negative 63-bit seed derived from arbitrary components.

    Uses SHA-256 so the stream is platform- and session-independent,
    unlike the builtin hash().
    """
    digest = hashlib.sha256("\x1f".join(str(p) for p in parts).encode("utf-8")).digest()
    return int.from_bytes(digest[:8], "little") >> 1
