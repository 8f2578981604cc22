"""Seeded random streams.

Every consumer of randomness (environment synthesis, the state sequence,
each agent, the evaluation set) draws from its own stream, derived from a
master seed and a short label.  Streams use the Philox counter-based
generator, so draws are identical on every platform numpy supports.
"""
import hashlib

import numpy as np

__all__ = ["derive_stream", "label_key", "derive_seed"]

_MASK64 = (1 << 64) - 1


def label_key(label):
    """Stable 64-bit integer for a stream label (independent of PYTHONHASHSEED)."""
    digest = hashlib.blake2b(label.encode("utf-8"), digest_size=8).digest()
    return int.from_bytes(digest, "little")


def derive_stream(master_seed, label):
    """Return a fresh ``numpy.random.Generator`` for ``(master_seed, label)``.

    The same pair always yields the same draw sequence; different labels
    are separated through the ``SeedSequence`` spawn key, so two streams
    never share generator state.
    """
    if master_seed < 0:
        raise ValueError(f"master seed must be non-negative, got {master_seed}")
    seq = np.random.SeedSequence(int(master_seed) & _MASK64, spawn_key=(label_key(label),))
    return np.random.Generator(np.random.Philox(seq))


def derive_seed(master_seed, label):
    """Derive a child 64-bit seed, e.g. the seed of an independently generated environment."""
    seq = np.random.SeedSequence(int(master_seed) & _MASK64, spawn_key=(label_key(label),))
    return int(seq.generate_state(1, dtype=np.uint64)[0])
