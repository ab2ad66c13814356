"""Counter-based random streams.

Every stream is a pure function of a master seed and an integer index; no
module keeps global generator state. Monte Carlo trials draw from a Philox
counter placed at ``trial * blocks``, so trial ``t`` sees the same uniforms no
matter how trials are split between workers.
"""

from __future__ import annotations

import numpy as np

# Philox emits four 64-bit words per counter step.
_WORDS_PER_BLOCK = 4


def _key(master_seed: int) -> np.ndarray:
    return np.random.SeedSequence(int(master_seed)).generate_state(2, np.uint64)


def substream(master_seed: int, index: int = 0) -> np.random.Generator:
    sequence = np.random.SeedSequence(int(master_seed), spawn_key=(int(index),))
    return np.random.Generator(np.random.Philox(sequence))


def blocks_per_trial(width: int) -> int:
    return -(-int(width) // _WORDS_PER_BLOCK)


def trial_uniforms(master_seed: int, start: int, stop: int, width: int) -> np.ndarray:
    """Uniform draws on [0, 1) for trials ``start..stop-1``, shape (stop-start, width)."""
    if stop <= start:
        return np.empty((0, width))
    blocks = blocks_per_trial(width)
    bit_generator = np.random.Philox(counter=int(start) * blocks, key=_key(master_seed))
    draws = np.random.Generator(bit_generator).random(
        (stop - start, blocks * _WORDS_PER_BLOCK)
    )
    return draws[:, :width]
