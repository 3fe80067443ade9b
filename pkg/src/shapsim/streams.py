"""Labeled random substreams derived from one 64-bit master seed.

Every simulation draws its randomness from named substreams so that runs are
bit-reproducible and independent components (honest player, adversary,
individual repetitions) never share a stream.

Derivation is a keyed counter construction: the substream key is the first
128 bits of ``SHA-256("shapsim:<seed>:<label>:<label>:...")`` and the
generator is Philox-4x64 keyed with those bits, wrapped in
``numpy.random.Generator``.  Test vectors live in ``tests/test_streams.py``;
any implementation of SHA-256 plus Philox-4x64 reproduces the raw streams.
"""

from __future__ import annotations

import hashlib

import numpy as np

_PREFIX = "shapsim"


def stream_key(master_seed: int, *labels: object) -> np.ndarray:
    """128-bit Philox key for the substream named by ``labels``."""
    text = ":".join([_PREFIX, str(int(master_seed))] + [str(l) for l in labels])
    digest = hashlib.sha256(text.encode("utf-8")).digest()
    return np.frombuffer(digest[:16], dtype=np.uint64).copy()

def substream(master_seed: int, *labels: object) -> np.random.Generator:
    """Independent generator for the substream named by ``labels``.

    The same ``(master_seed, labels)`` pair always yields a generator that
    produces the identical sequence, regardless of what any other substream
    has consumed.
    """
    return np.random.Generator(np.random.Philox(key=stream_key(master_seed, *labels)))
