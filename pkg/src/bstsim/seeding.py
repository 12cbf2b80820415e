"""Deterministic derivation of per-role random seeds from one root seed.

Every randomized role in a session (sender bits, receiver bases, channel
noise, sampling, permutations, ...) gets its own rng seeded by hashing the
root seed with a role label, so changing one role's consumption pattern
never perturbs the others.
"""

from __future__ import annotations

import hashlib


def derive_seed(root: int, label: str) -> int:
    """Derive a 64-bit sub-seed for a named role from the root seed."""
    digest = hashlib.sha256(f"{root}:{label}".encode("utf-8")).digest()
    return int.from_bytes(digest[:8], "big")
