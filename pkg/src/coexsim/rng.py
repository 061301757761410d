"""Stable seed derivation and per-link random draws.

All randomness in a campaign is derived from a 64-bit master seed through
keyed blake2b hashes, so results are bit-identical across runs, platforms
and degrees of parallelism, and adding a new stream never perturbs the
existing ones.
"""

import hashlib
import math

_SEP = b"\x1f"


def stable_hash64(*parts) -> int:
    """64-bit hash of the stringified parts (stable across processes)."""
    h = hashlib.blake2b(digest_size=8)
    for p in parts:
        h.update(str(p).encode())
        h.update(_SEP)
    return int.from_bytes(h.digest(), "little")


def pair_draws(drop_seed: int, key_a: str, key_b: str) -> tuple[float, float]:
    """(uniform, standard normal) drawn once per unordered node pair.

    The uniform drives the LOS Bernoulli, the normal the shadow fading.
    Keys are sorted so both link directions see the same draw (large-scale
    reciprocity).
    """
    a, b = sorted((key_a, key_b))
    h = hashlib.blake2b(digest_size=24)
    h.update(str(drop_seed).encode())
    h.update(_SEP)
    h.update(a.encode())
    h.update(_SEP)
    h.update(b.encode())
    d = h.digest()
    u_los = int.from_bytes(d[0:8], "little") / 2.0**64
    # Box-Muller; u1 shifted away from 0 so log() is finite
    u1 = (int.from_bytes(d[8:16], "little") + 1) / (2.0**64 + 1)
    u2 = int.from_bytes(d[16:24], "little") / 2.0**64
    z = math.sqrt(-2.0 * math.log(u1)) * math.cos(2.0 * math.pi * u2)
    return u_los, z
