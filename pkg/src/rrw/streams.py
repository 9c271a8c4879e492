"""Reproducible parallel randomness.

A Stream names a counter-based generator by (master seed, derivation key).
Replica r of an experiment with master seed m draws from Stream(m, (r,)):
streams are independent, order-free, and identical regardless of how work
is scheduled across workers.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = ["Stream", "as_stream"]


@dataclass(frozen=True)
class Stream:
    master: int
    key: tuple = ()

    def generator(self):
        """Fresh Philox generator for this (master, key); same draws every call."""
        ss = np.random.SeedSequence(self.master, spawn_key=self.key)
        return np.random.Generator(np.random.Philox(ss))

    def child(self, *indices):
        return Stream(self.master, self.key + tuple(int(i) for i in indices))


def as_stream(value):
    if isinstance(value, Stream):
        return value
    if isinstance(value, (int, np.integer)):
        return Stream(int(value))
    raise TypeError(f"expected a Stream or an integer seed, got {value!r}")
