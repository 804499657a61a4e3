"""
Seed splitting
A master seed is split into independent per-stage / per-cell seeds by hashing
the master seed together with a label path. Enabling or disabling one stage
never shifts the randomness of another, and parallel work units get the same
seed they would get serially.
"""

import hashlib

import numpy as np


def derive_seed(master: int, *labels) -> int:
    """
    Derive a 64-bit seed from a master seed and a label path
    Args:
        master: Master seed
        labels: Any printable path components, e.g. ("baseline", "full", 3)
    Returns:
        Unsigned 64-bit integer
    Example:
        derive_seed(42, "bnn", "normal-0-10", "reduced")
    """
    key = ":".join([str(int(master))] + [str(label) for label in labels])
    digest = hashlib.sha256(key.encode("utf-8")).digest()
    return int.from_bytes(digest[:8], "little")


def make_rng(seed: int) -> np.random.Generator:
    """Returns a PCG64 generator for the given seed"""
    return np.random.Generator(np.random.PCG64(seed))
