"""Reproducible (seed, stream)-addressed random streams."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

_U64 = (1 << 64) - 1


@dataclass(frozen=True)
class SeededRng:
    """Address of an independent random stream.

    ``(seed, stream)`` is mapped through :class:`numpy.random.SeedSequence`
    (``spawn_key=(stream,)``) onto a PCG64 generator, so identical addresses
    give identical sequences on every platform and distinct streams are
    statistically independent. The value itself never changes; call
    :meth:`generator` for a fresh generator positioned at the start of the
    stream.
    """

    seed: int = 0
    stream: int = 0

    def __post_init__(self):
        for name in ("seed", "stream"):
            v = getattr(self, name)
            if not isinstance(v, (int, np.integer)) or not 0 <= int(v) <= _U64:
                raise ValueError(f"{name} must be an unsigned 64-bit integer, got {v!r}")

    def generator(self) -> np.random.Generator:
        ss = np.random.SeedSequence(entropy=int(self.seed), spawn_key=(int(self.stream),))
        return np.random.Generator(np.random.PCG64(ss))

    def with_stream(self, stream: int) -> "SeededRng":
        return SeededRng(self.seed, stream)

    def advance(self, k: int = 1) -> "SeededRng":
        return SeededRng(self.seed, (int(self.stream) + k) & _U64)


def as_generator(rng) -> np.random.Generator:
    """Accept a :class:`SeededRng`, a numpy Generator, an int seed or None."""
    if isinstance(rng, np.random.Generator):
        return rng
    if isinstance(rng, SeededRng):
        return rng.generator()
    if rng is None or isinstance(rng, (int, np.integer)):
        return SeededRng(0 if rng is None else int(rng)).generator()
    raise TypeError(f"cannot build a random generator from {type(rng).__name__}")
