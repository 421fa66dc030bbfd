"""Deterministic derivation of per-item RNG seeds."""

import hashlib

_MASK64 = 0xFFFFFFFFFFFFFFFF


def derive_seed(global_seed: int, *parts: str) -> int:
    """Mix a global seed with string parts into a 64-bit seed.

    Keyed BLAKE2b keeps the result stable across processes, platforms and
    Python versions (unlike ``hash()``), so a batch item gets the same RNG
    stream no matter how the batch is ordered, sharded or parallelised.
    """
    key = (global_seed & _MASK64).to_bytes(8, "little")
    h = hashlib.blake2b(digest_size=8, key=key)
    for part in parts:
        h.update(part.encode("utf-8"))
        h.update(b"\x1f")
    return int.from_bytes(h.digest(), "little")
