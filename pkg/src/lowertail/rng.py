"""Counter-based random streams.

Every random draw in the package comes from a Philox stream whose key is
derived from ``(seed, *stream)`` and whose counter encodes a step index
(the sweep number for chains, the batch number for rejection samplers).
Results therefore depend only on those integers, never on call order, which
is what makes checkpoints resume bit-exactly.
"""
from __future__ import annotations

from functools import lru_cache

import numpy as np

__all__ = ["stream_key", "step_generator", "uniforms"]


@lru_cache(maxsize=4096)
def _key(seed: int, stream: tuple) -> tuple[int, int]:
    words = np.random.SeedSequence([int(seed) & 0xFFFFFFFF, int(seed) >> 32, *map(int, stream)])
    k = words.generate_state(2, np.uint64)
    return int(k[0]), int(k[1])


def stream_key(seed: int, *stream: int) -> np.ndarray:
    """128-bit Philox key for the stream identified by ``(seed, *stream)``."""
    return np.array(_key(int(seed), tuple(int(s) for s in stream)), dtype=np.uint64)


def step_generator(seed: int, stream: tuple, step: int) -> np.random.Generator:
    """Generator for step ``step`` of a stream.

    The step index sits in the most significant counter word, so consecutive
    steps can never overlap however many numbers a step consumes.
    """
    if step < 0:
        raise ValueError("step must be nonnegative")
    counter = np.array([0, 0, 0, step], dtype=np.uint64)
    bg = np.random.Philox(counter=counter, key=stream_key(seed, *stream))
    return np.random.Generator(bg)


def uniforms(seed: int, stream: tuple, step: int, shape) -> np.ndarray:
    """Uniform(0,1) array for one step; entry positions index sites."""
    u = step_generator(seed, stream, step).random(shape)
    # random() is on [0, 1); inverse-CDF samplers want the open interval
    np.maximum(u, np.finfo(float).tiny, out=u)
    return u
