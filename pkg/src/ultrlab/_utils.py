from __future__ import annotations

import hashlib
import zlib

import numpy as np


def derived_rng(seed: int, key: str) -> np.random.Generator:
    """Generator for the substream ``(seed, key)``; independent of call order."""
    return np.random.default_rng([int(seed), zlib.crc32(key.encode("utf-8"))])


def qid_unit(qid: str, seed: int) -> float:
    """Seeded hash of a qid mapped to ``[0, 1)``."""
    h = hashlib.blake2b(f"{seed}:{qid}".encode("utf-8"), digest_size=8).digest()
    return int.from_bytes(h, "big") / 2.0**64


def split_by_qid(qids, fractions, names, seed: int) -> dict[str, str]:
    """Assign each qid to a named split by its seeded hash bucket."""
    edges = np.cumsum(fractions)
    if not np.isclose(edges[-1], 1.0):
        raise ValueError("split fractions must sum to 1")
    out = {}
    for q in qids:
        u = qid_unit(q, seed)
        out[q] = names[int(np.searchsorted(edges, u, side="right"))] if u < edges[-1] else names[-1]
    return out
