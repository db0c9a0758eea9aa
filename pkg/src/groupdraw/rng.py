"""Seedable random streams for reproducible, parallelizable simulation.

A stream is identified by (seed, stream_id).  The same pair always yields
the same sequence; distinct stream_ids under one seed give statistically
independent generators, so Monte Carlo work can be split across workers
and merged deterministically.
"""

from __future__ import annotations

import secrets
from dataclasses import dataclass

import numpy as np

__all__ = ["RngStream", "as_generator", "fresh_seed"]


@dataclass(frozen=True)
class RngStream:
    seed: int
    stream_id: int = 0

    def generator(self) -> np.random.Generator:
        ss = np.random.SeedSequence(entropy=self.seed, spawn_key=(self.stream_id,))
        return np.random.Generator(np.random.PCG64(ss))

    def substream(self, stream_id: int) -> "RngStream":
        return RngStream(self.seed, stream_id)

    def spawn(self, n: int, base: int = 0) -> list["RngStream"]:
        return [RngStream(self.seed, base + i) for i in range(n)]


def as_generator(rng) -> np.random.Generator:
    """Accept an RngStream, a Generator, or a plain int seed."""
    if isinstance(rng, np.random.Generator):
        return rng
    if isinstance(rng, RngStream):
        return rng.generator()
    if isinstance(rng, int):
        return RngStream(rng).generator()
    raise TypeError(f"cannot make a generator from {type(rng).__name__}")


def fresh_seed() -> int:
    """Random 63-bit seed for runs where the user did not supply one."""
    return secrets.randbits(63)
