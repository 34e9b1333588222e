"""Counter-based random streams.

Every trajectory draws from its own Philox stream keyed by
``(master seed, stream index)``.  Sub-experiments that need unrelated
streams from one master seed go through :func:`derive_seed`.
"""
import os

import numpy as np

_MASK = (1 << 64) - 1


def stream(seed: int, index: int = 0) -> np.random.Generator:
    key = np.array([int(seed) & _MASK, int(index) & _MASK], dtype=np.uint64)
    return np.random.Generator(np.random.Philox(key=key))


def derive_seed(seed: int, *labels) -> int:
    """Deterministic child seed for a labelled sub-experiment."""
    words = [int(seed) & 0xFFFFFFFF, (int(seed) >> 32) & 0xFFFFFFFF]
    for lab in labels:
        if isinstance(lab, str):
            words.extend(lab.encode())
        else:
            words.append(int(lab) & 0xFFFFFFFF)
    ss = np.random.SeedSequence(words)
    return int(ss.generate_state(1, np.uint64)[0])


def default_seed(seed=None) -> int:
    if seed is not None:
        return int(seed)
    env = os.environ.get("WFDUAL_SEED")
    return int(env) if env else 0
