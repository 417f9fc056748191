"""Deterministic splittable random streams.

Every stochastic routine takes either a seed (int) or a numpy Generator.
Batch estimators split their work into substreams indexed by worker id;
results are merged by index, so output is a pure function of
(seed, substream count) regardless of scheduling.
"""

from __future__ import annotations

import numpy as np

_U63 = (1 << 63) - 1


def generator(seed, stream: int = 0) -> np.random.Generator:
    """Counter-keyed Philox generator for (seed, stream)."""
    if isinstance(seed, np.random.Generator):
        if stream == 0:
            return seed
        raise ValueError("cannot derive substreams from a raw Generator; pass an int seed")
    key = np.array([np.uint64(int(seed) & _U63), np.uint64(stream & _U63)])
    return np.random.Generator(np.random.Philox(key=key))


def kernel_seed(seed, stream: int = 0) -> int:
    """32-bit seed for a jitted kernel, derived from (seed, stream)."""
    ss = np.random.SeedSequence([int(seed) & _U63, int(stream) & _U63])
    return int(ss.generate_state(1, dtype=np.uint32)[0])


def substream_seeds(seed, n: int) -> list[int]:
    """Independent kernel seeds for n substreams."""
    return [kernel_seed(seed, i) for i in range(n)]
