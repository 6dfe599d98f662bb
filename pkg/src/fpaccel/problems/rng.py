"""Counter-based random streams: (seed, replication, stream name) fully determines the draws."""

import zlib

import numpy as np

# bump when the stream layout changes; datasets from different versions are not comparable
RNG_VERSION = 1


def make_rng(seed: int, rep: int = 0, stream: str = "") -> np.random.Generator:
    key = [RNG_VERSION, int(seed), int(rep), zlib.crc32(stream.encode())]
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(key)))
