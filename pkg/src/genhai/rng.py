"""Seedable, splittable random number streams.

All sampling in this package goes through numpy Generators built from
explicit SeedSequences, so that every sampler is a deterministic function
of (seed, inputs) and parallel Monte Carlo can hand each worker its own
independent stream.
"""

from __future__ import annotations

import hashlib

import numpy as np


def seed_sequence(seed: int) -> np.random.SeedSequence:
    return np.random.SeedSequence(int(seed))


def make_rng(seed: int | np.random.SeedSequence) -> np.random.Generator:
    if not isinstance(seed, np.random.SeedSequence):
        seed = seed_sequence(seed)
    return np.random.Generator(np.random.Philox(seed))


def split(seq: np.random.SeedSequence, n: int) -> list[np.random.SeedSequence]:
    """Split a seed sequence into n independent child sequences."""
    return seq.spawn(n)


def stable_key(name: str) -> int:
    """Deterministic 63-bit integer derived from a string, stable across runs."""
    digest = hashlib.sha256(name.encode("utf-8")).digest()
    return int.from_bytes(digest[:8], "big") >> 1


def named_stream(seed: int, name: str) -> np.random.Generator:
    """Stream keyed by (seed, name); independent of any other named stream."""
    return make_rng(np.random.SeedSequence([int(seed), stable_key(name)]))
