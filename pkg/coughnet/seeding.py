"""
Keyed random sub-streams.

Every stage draws from its own ``numpy.random.Generator`` derived from the
single run seed, a stream name and any number of integer keys, so stages
(and items within a stage) can run in any order or in parallel and still
produce identical results.
"""

import typing as ty
import zlib

import numpy as np

STREAMS = ('folds', 'augment', 'init', 'shuffle', 'dropout', 'synth')


def stream_key(name: str) -> int:
    return zlib.crc32(name.encode('utf-8'))


def substream(seed: int, name: str, *keys: int) -> np.random.Generator:
    """Return the generator for ``(seed, name, *keys)``."""
    entropy: ty.List[int] = [int(seed), stream_key(name)]
    entropy.extend(int(k) for k in keys)

    return np.random.default_rng(np.random.SeedSequence(entropy))
