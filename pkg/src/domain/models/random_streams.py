"""
Reproducible random streams for replicated Monte Carlo work.

A stream is identified by (master seed, purpose, replicate index). Each one
gets its own counter-based Philox generator keyed through a SeedSequence
spawn key, so replicate i draws the same numbers whichever worker runs it.
"""

from enum import IntEnum

import numpy as np


class StreamPurpose(IntEnum):
    """Namespaces that keep independent uses of one master seed apart."""
    TREE = 0
    SPINE = 1
    SWEEP = 2
    PASSAGE = 3


def rng_for(seed: int, replicate: int = 0, purpose: StreamPurpose = StreamPurpose.TREE) -> np.random.Generator:
    """
    Builds the generator of one replicate stream.

    Args:
        seed: The 64-bit master seed.
        replicate: The replicate index inside the experiment.
        purpose: Which family of draws the stream serves.

    Returns:
        A numpy Generator backed by a Philox bit generator.
    """
    if seed < 0 or replicate < 0:
        raise ValueError("Seeds and replicate indices must be non-negative.")
    sequence = np.random.SeedSequence(entropy=int(seed), spawn_key=(int(purpose), int(replicate)))
    return np.random.Generator(np.random.Philox(sequence))
