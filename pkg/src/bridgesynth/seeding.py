"""Stable seed derivation so every pipeline stage gets its own random stream."""
import hashlib

import numpy as np


def derive_seed(master_seed, *keys):
    """Hash ``master_seed`` and ``keys`` into an unsigned 64-bit seed.

    The result does not depend on Python's hash randomization, so it is stable
    across processes and runs.
    """
    text = ":".join(str(k) for k in (int(master_seed),) + keys)
    digest = hashlib.blake2b(text.encode("utf-8"), digest_size=8).digest()
    return int.from_bytes(digest, "little")


def rng_for(seed, *keys):
    return np.random.default_rng(derive_seed(seed, *keys) if keys else int(seed))
