"""Deterministic seed derivation.

Every random stream in the pipeline is derived from a single root seed
plus a label path (stage name, class id, record index, ...), so a rerun
with the same root reproduces every stream bit-for-bit without any seed
bookkeeping between stages. SHA-256 keeps the derivation stable across
platforms and Python versions (unlike hash()).
"""

import hashlib

import numpy as np


def derive_seed(root, *labels):
    """Derive a 64-bit child seed from a root seed and a label path."""
    h = hashlib.sha256()
    h.update(str(int(root)).encode())
    for lab in labels:
        h.update(b"/")
        h.update(str(lab).encode())
    return int.from_bytes(h.digest()[:8], "little")


def rng_for(root, *labels):
    """A numpy Generator on an independent stream for the label path."""
    return np.random.Generator(np.random.PCG64(derive_seed(root, *labels)))
