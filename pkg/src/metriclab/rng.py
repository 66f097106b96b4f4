"""Deterministic random streams.

A single 64-bit master seed drives every experiment.  Child streams are
derived by hashing (parent_seed, label), so parallel trials get independent,
schedule-invariant streams.  The underlying bit generator is Philox, which is
counter-based.
"""

import hashlib

import numpy as np

_MASK64 = (1 << 64) - 1


def child_seed(seed: int, label: str) -> int:
    """Derive a 64-bit child seed from (seed, label)."""
    payload = f"{seed & _MASK64}:{label}".encode()
    return int.from_bytes(hashlib.blake2b(payload, digest_size=8).digest(), "little")


def generator(seed: int, label: str = "") -> np.random.Generator:
    """A counter-based generator for the given seed (and optional stream label)."""
    key = child_seed(seed, label) if label else (seed & _MASK64)
    return np.random.Generator(np.random.Philox(key=key))
