"""Stable 64-bit content digests (blake2b truncated to 8 bytes)."""

from __future__ import annotations

import hashlib


def digest64(data: bytes) -> int:
    return int.from_bytes(hashlib.blake2b(data, digest_size=8).digest(), "little")


def digest64_hex(data: bytes) -> str:
    return format(digest64(data), "016x")
