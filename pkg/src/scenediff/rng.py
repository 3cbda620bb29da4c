"""Counter-style RNG derivation.

All stochastic choices in this package are drawn from generators derived
functionally from (seed, stream ids). That makes training resumable without
serializing RNG state and makes per-sample noise independent of how a batch
is split into micro-batches.
"""

import numpy as np


def rng_for(seed: int, *stream: int) -> np.random.Generator:
    """A fresh Philox generator for the given seed and stream coordinates."""
    ss = np.random.SeedSequence(entropy=int(seed), spawn_key=tuple(int(s) for s in stream))
    return np.random.Generator(np.random.Philox(ss))
