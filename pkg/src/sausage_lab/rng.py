"""Counter-based random number plumbing.

Every stochastic routine in the library derives its randomness from a Philox
counter-based bit generator keyed through ``numpy.random.SeedSequence``. Philox
streams have two properties the library relies on:

* prefix stability: the first k draws of a stream do not depend on how many
  draws are requested afterwards, so a batched run and a single-path run that
  consume the same stream see identical values;
* cheap independent keying: ``SeedSequence((master_seed, index))`` yields
  decorrelated child streams, so per-realization streams are reproducible
  without coordination.

Chunked draws concatenate bit-identically with one large draw, so buffer sizes
never affect results.
"""

from __future__ import annotations

import numpy as np

__all__ = ["generator_for", "realization_seed_pairs", "NoiseSource"]


def generator_for(*key: int) -> np.random.Generator:
    """Return a Philox generator keyed by an integer tuple.

    ``generator_for(seed)`` is the master stream for ``seed``;
    ``generator_for(seed, i)`` is the stream of realization ``i``.
    """
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(key)))


def realization_seed_pairs(master_seed: int, n: int) -> list[tuple[int, int]]:
    """Keys of the n per-realization streams under ``master_seed``."""
    return [(int(master_seed), i) for i in range(n)]


class NoiseSource:
    """Standard-normal stream for one realization, drawn in chunks.

    The stream is a pure function of the key; chunk sizes are an
    implementation detail and never change the values produced.
    """

    def __init__(self, *key: int):
        self._gen = generator_for(*key)

    def normals(self, shape: tuple[int, ...]) -> np.ndarray:
        return self._gen.standard_normal(shape)

    def uniforms(self, shape: tuple[int, ...]) -> np.ndarray:
        return self._gen.random(shape)
