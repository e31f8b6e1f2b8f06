"""Deterministic seed derivation for independent random streams."""
from __future__ import annotations

import hashlib


def derive_seed(base_seed: int, *parts: str) -> int:
    """Stable 64-bit sub-seed from a base seed and string tags.

    Hash-based, so derived streams are independent of draw order and of how
    work is distributed across processes.
    """
    h = hashlib.blake2b(digest_size=8)
    h.update(int(base_seed).to_bytes(8, "little", signed=False))
    for part in parts:
        h.update(b"\x00")
        h.update(str(part).encode("utf-8"))
    return int.from_bytes(h.digest(), "little")
