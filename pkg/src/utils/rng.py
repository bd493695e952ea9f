"""
Keyed random streams.

Every independent piece of randomness in a soup (a field cell, a loop
index, a small-loop cell, an experiment seed) gets its own counter-based
Philox stream derived from ``(seed, tag, *key)``. Generation order and
thread scheduling therefore never change the output.
"""

import numpy as np

# Stream tags; part of the key so that e.g. cell (0, 0) and pair (0, 0, ...)
# never share a stream.
FIELD_CELL = 1
LOOP_PAIR = 2
SMALL_LOOPS = 3
EXPERIMENT = 4


def _fold(value: int) -> int:
    # SeedSequence spawn keys must be non-negative
    value = int(value)
    return 2 * value if value >= 0 else -2 * value - 1


def keyed_generator(seed: int, tag: int, *key: int) -> np.random.Generator:
    """
    Build an independent generator for ``key`` under ``seed``.

    Args:
        seed: Experiment seed (non-negative)
        tag: Stream family (one of the module constants)
        *key: Integer coordinates, negative values allowed

    Returns:
        numpy Generator backed by a Philox counter-based bit generator
    """
    spawn_key = (int(tag),) + tuple(_fold(k) for k in key)
    sequence = np.random.SeedSequence(int(seed), spawn_key=spawn_key)
    return np.random.Generator(np.random.Philox(sequence))
