"""
Seeded substreams and block-parallel map with an ordered reduction.

Work is cut into fixed-size blocks; block ``b`` of a stream draws from a
generator seeded by (master seed, stream tag, ..., b). The block layout does
not depend on the worker count, and results come back in block order, so the
output of a run is the same for any number of threads.
"""
import logging
from concurrent.futures import ThreadPoolExecutor

import numpy as np
from django.conf import settings

logger = logging.getLogger(__name__)

BLOCK_SIZE = 4096

# stream tags keep draws for different purposes independent under one master seed
STREAM_GAUSSIAN = 1
STREAM_SAMPLE = 2
STREAM_TRIALS = 3
STREAM_OSCILLATION = 4
STREAM_SYMMETRIZATION = 5


def substream(seed, *key):
    """
    A PCG64 generator for the substream ``key`` of the master ``seed``.

    Normals drawn from it use numpy's ziggurat sampler.
    """
    sequence = np.random.SeedSequence(int(seed), spawn_key=tuple(int(k) for k in key))
    return np.random.Generator(np.random.PCG64(sequence))


def default_workers():
    if settings.configured:
        return max(1, int(getattr(settings, 'ERM_LAB_THREADS', 1)))
    return 1


def blocks(total, block_size=BLOCK_SIZE):
    """(block index, block length) pairs covering ``total`` items."""
    return [
        (index, min(block_size, total - start))
        for index, start in enumerate(range(0, total, block_size))
    ]


def map_blocks(func, total, workers=None, block_size=BLOCK_SIZE):
    """
    Call ``func(block_index, block_length)`` for every block and return the
    results in block order.
    """
    layout = blocks(total, block_size)
    workers = default_workers() if workers is None else max(1, int(workers))
    if workers == 1 or len(layout) <= 1:
        return [func(index, length) for index, length in layout]
    logger.debug(f'running {len(layout)} blocks on {workers} threads')
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(lambda item: func(*item), layout))
