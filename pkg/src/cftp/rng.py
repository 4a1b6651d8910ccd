"""Deterministic random streams with reproducible substream splitting.

Every random draw in this package flows through an :class:`RngStream`, a thin
wrapper around NumPy's PCG64 generator.  A stream is identified by a 64-bit
root seed plus a *path* of integer indices; the generator is built from
``SeedSequence(entropy=seed, spawn_key=path)``, so equal (seed, path) pairs
reproduce the same variate sequence bit for bit, on any platform.

Splitting rule used by the experiment harness: substream 0 of the root seed
drives data generation, and substream ``r + 1`` drives replicate ``r``.
"""

from __future__ import annotations

import numpy as np


class RngStream:
    """A seeded variate stream that can split off independent substreams."""

    def __init__(self, seed: int, path: tuple[int, ...] = ()):
        self.seed = int(seed)
        self.path = tuple(int(i) for i in path)
        seq = np.random.SeedSequence(entropy=self.seed, spawn_key=self.path)
        self._gen = np.random.Generator(np.random.PCG64(seq))

    def substream(self, index: int) -> "RngStream":
        """Return the independent child stream at ``index``.

        Children are keyed by (seed, path + (index,)); creating the same child
        twice yields two streams that emit identical variates.
        """
        return RngStream(self.seed, self.path + (int(index),))

    @property
    def generator(self) -> np.random.Generator:
        return self._gen

    def uniform(self) -> float:
        """One U[0, 1) variate."""
        return float(self._gen.random())

    def uniforms(self, n: int) -> np.ndarray:
        """``n`` U[0, 1) variates in draw order."""
        return self._gen.random(n)

    def normal(self, loc: float = 0.0, scale: float = 1.0) -> float:
        return float(self._gen.normal(loc, scale))

    def index_from_cdf(self, cdf: np.ndarray) -> int:
        """Inverse-CDF draw: smallest index i with cdf[i] > U for one uniform U.

        ``cdf`` is a cumulative weight vector ending at 1 (within rounding).
        Consumes exactly one uniform variate.
        """
        u = self._gen.random()
        idx = int(np.searchsorted(cdf, u, side="right"))
        return min(idx, len(cdf) - 1)

    def __repr__(self) -> str:  # pragma: no cover - debugging aid
        return f"RngStream(seed={self.seed}, path={self.path})"
