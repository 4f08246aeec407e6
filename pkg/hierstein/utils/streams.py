# hierstein/utils/streams.py
# Counter-derived random substreams. Every random quantity in the package is drawn from
# a Philox generator keyed by (master seed, *spawn key), so a draw's value depends only on
# where it sits in the computation, never on which worker thread produced it.
from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from typing import Callable, Iterator, List, Sequence, Tuple, TypeVar

import numpy as np

from hierstein.config import CHUNK_SIZE

T = TypeVar("T")

# stream tags (first spawn-key element)
TAG_X = 0
TAG_Y = 1
TAG_BETA = 2
TAG_ZERO_BIAS = 3
TAG_REPLICATE = 4


def substream(seed: int, *key: int) -> np.random.Generator:
    ss = np.random.SeedSequence(entropy=int(seed), spawn_key=tuple(int(k) for k in key))
    return np.random.Generator(np.random.Philox(ss))


def replicate_seed(seed: int, replicate: int) -> int:
    """Master seed of one replicate, derived through its own substream."""
    ss = np.random.SeedSequence(entropy=int(seed), spawn_key=(TAG_REPLICATE, int(replicate)))
    return int(ss.generate_state(1, dtype=np.uint64)[0])


def chunks(total: int, size: int = CHUNK_SIZE) -> List[Tuple[int, int, int]]:
    """(chunk index, start, stop) triples covering range(total)."""
    return [(i, start, min(start + size, total)) for i, start in enumerate(range(0, total, size))]


def parallel_map(fn: Callable[[T], np.ndarray], items: Sequence[T], threads: int) -> Iterator:
    """Ordered map; numpy releases the GIL inside the heavy kernels."""
    if threads <= 1 or len(items) <= 1:
        return map(fn, items)
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return iter(list(pool.map(fn, items)))


def chunked_uniforms(
    seed: int, key: Tuple[int, ...], total: int, width: int, threads: int = 1
) -> np.ndarray:
    """A (total, width) matrix of uniforms in (0,1), filled chunk by chunk."""
    def _one(ch: Tuple[int, int, int]) -> np.ndarray:
        idx, start, stop = ch
        return open_uniforms(substream(seed, *key, idx), (stop - start, width))

    parts = list(parallel_map(_one, chunks(total), threads))
    if not parts:
        return np.empty((0, width))
    return np.concatenate(parts, axis=0)


def open_uniforms(rng: np.random.Generator, shape) -> np.ndarray:
    """Uniforms strictly inside (0,1): Generator.random can return exactly 0."""
    u = rng.random(shape)
    return np.where(u == 0.0, np.finfo(float).tiny, u)
