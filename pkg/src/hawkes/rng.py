"""Reproducible random streams for simulation runs.

All exponential draws in the toolkit go through :class:`ExponentialStream`,
which applies the inverse-CDF transform to uniforms from a counter-based
Philox generator.  Streams are keyed by ``(seed, replica)`` so Monte Carlo
replicas get independent, reproducible sub-streams without any shared state.
"""

from __future__ import annotations

import numpy as np
from numpy.random import Generator, Philox


def philox_generator(seed: int, replica: int = 0) -> Generator:
    """Counter-based 64-bit generator for the (seed, replica) stream."""
    key = np.array([np.uint64(seed & 0xFFFFFFFFFFFFFFFF),
                    np.uint64(replica & 0xFFFFFFFFFFFFFFFF)], dtype=np.uint64)
    return Generator(Philox(key=key))


class ExponentialStream:
    """Stream of Exp(1) variates via inverse CDF on Philox uniforms.

    Draw order is part of the reproducibility contract: ``exp``, ``uniform``
    and ``exp_array`` consume from the same underlying uniform sequence, so a
    consumer that interleaves them always replays identically for a fixed
    ``(seed, replica)``.
    """

    def __init__(self, seed: int, replica: int = 0):
        self.seed = int(seed)
        self.replica = int(replica)
        self._gen = philox_generator(seed, replica)

    def uniform(self) -> float:
        """Next uniform in [0, 1)."""
        return float(self._gen.random())

    def exp(self) -> float:
        """Next Exp(1) variate, strictly positive.

        Uses the numpy ufunc so scalar draws agree bit-for-bit with block
        draws from ``exp_array`` (libm's log1p can differ in the last ulp).
        """
        # u == 0 maps to 0 under -log1p(-u); redraw so gaps stay positive.
        while True:
            e = float(-np.log1p(-self.uniform()))
            if e > 0.0:
                return e

    def exp_array(self, n: int) -> np.ndarray:
        """n Exp(1) variates in one vectorized draw."""
        u = self._gen.random(int(n))
        e = -np.log1p(-u)
        bad = e <= 0.0
        while bad.any():
            u = self._gen.random(int(bad.sum()))
            e[bad] = -np.log1p(-u)
            bad = e <= 0.0
        return e
