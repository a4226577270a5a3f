"""Deterministic seed derivation for parallel Monte Carlo replication.

A master seed splits into per-subsystem / per-replication streams through
a counter-based SHA-256 hash, so results are independent of execution
order and thread count. Always derive; never share a Generator between
replications.
"""

from __future__ import annotations

import hashlib

import numpy as np


def derive_seed(master_seed: int, *labels) -> int:
    """Derive a child seed from the master seed and a label path.

    Labels may be strings or integers (e.g. ("market", replication_index)).
    The same (master, labels) always maps to the same 64-bit seed.
    """
    h = hashlib.sha256()
    h.update(str(int(master_seed)).encode())
    for label in labels:
        h.update(b"/")
        h.update(str(label).encode())
    return int.from_bytes(h.digest()[:8], "little")


def generator(master_seed: int, *labels) -> np.random.Generator:
    """A fresh PCG64 generator on the derived stream."""
    return np.random.Generator(np.random.PCG64(derive_seed(master_seed, *labels)))


def replication_seeds(master_seed: int, subsystem: str, n: int) -> list[int]:
    """Seeds for n replications of a subsystem, index-stable."""
    return [derive_seed(master_seed, subsystem, i) for i in range(n)]
