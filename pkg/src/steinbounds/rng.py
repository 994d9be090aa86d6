"""Seeded, splittable random streams.

Every draw comes from ``PCG64`` seeded by ``SeedSequence(seed, spawn_key=(stream, chunk))``.
Large sample requests are cut into fixed-size chunks, each with its own
key, so the output never depends on how many workers consume the chunks.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

CHUNK_SIZE = 1 << 15
DEFAULT_SEED = 42


@dataclass(frozen=True)
class RngStream:
    seed: int
    stream: int = 0

    def generator(self, chunk: int = 0) -> np.random.Generator:
        ss = np.random.SeedSequence(self.seed, spawn_key=(self.stream, chunk))
        return np.random.Generator(np.random.PCG64(ss))

    def substream(self, offset: int) -> "RngStream":
        return RngStream(self.seed, self.stream * 1_000_003 + offset + 1)


def chunked(draw, stream: RngStream, count: int, workers: int = 1) -> np.ndarray:
    """Concatenate ``draw(generator, size)`` over deterministic chunks."""
    sizes = [CHUNK_SIZE] * (count // CHUNK_SIZE)
    if count % CHUNK_SIZE:
        sizes.append(count % CHUNK_SIZE)

    def one(i):
        return draw(stream.generator(i), sizes[i])

    if workers > 1 and len(sizes) > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(one, range(len(sizes))))
    else:
        parts = [one(i) for i in range(len(sizes))]
    return np.concatenate(parts)
