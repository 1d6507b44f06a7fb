"""Deterministic substream derivation from a single root seed.

Every stochastic routine in the package draws from a generator obtained
here, so that one root seed fixes the whole run and independent
components (contributor sampling, subsampling, permutation draws) never
share or race for a stream.
"""

from __future__ import annotations

import zlib

import numpy as np


def _as_key(part: int | str) -> int:
    if isinstance(part, str):
        return zlib.crc32(part.encode("utf-8"))
    return int(part) & 0xFFFFFFFF


def substream(seed: int, *path: int | str) -> np.random.Generator:
    """Return a generator for the substream named by ``path`` under ``seed``.

    The same (seed, path) pair always yields the same stream; distinct
    paths yield statistically independent streams.
    """
    key = tuple(_as_key(p) for p in path)
    return np.random.default_rng(np.random.SeedSequence(entropy=seed, spawn_key=key))


def derive_seed(seed: int, *path: int | str) -> int:
    """Collapse a substream address into a plain integer seed.

    Used where an API takes a scalar seed rather than a generator; the
    derived value inherits the independence guarantees of substream.
    """
    key = tuple(_as_key(p) for p in path)
    state = np.random.SeedSequence(entropy=seed, spawn_key=key).generate_state(2)
    return int(state[0]) << 32 | int(state[1])
