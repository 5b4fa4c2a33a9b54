"""Reproducible per-replica random streams."""
from __future__ import annotations

import zlib

import numpy as np


def tag_key(tag: str) -> int:
    return zlib.crc32(tag.encode("utf8"))


def replica_seed(master: int, replica: int, tag: str = "") -> int:
    """Stable 63-bit seed for ``(master, replica, tag)``, independent of scheduling."""
    ss = np.random.SeedSequence(int(master), spawn_key=(int(replica), tag_key(tag)))
    return int(ss.generate_state(1, np.uint64)[0] >> np.uint64(1))


def replica_generator(master: int, replica: int, tag: str = "") -> np.random.Generator:
    return np.random.default_rng(replica_seed(master, replica, tag))
