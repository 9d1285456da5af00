"""Seeded, counter-based random streams.

Every consumer asks for a named substream of a root seed.  Streams are
Philox generators keyed by ``SeedSequence(seed, spawn_key=(stream_id, *path))``
so that, for example, the label-flip stream of a dataset is independent of
its covariate stream: changing the noise rate never perturbs ``X``.
"""

from __future__ import annotations

import numbers

import numpy as np

from .errors import ValidationError

# Stable ids; never renumber, datasets depend on them.
STREAMS = {
    "covariates": 1,
    "clean_labels": 2,
    "flips": 3,
    "clusters": 4,
    "init": 5,
    "probes": 6,
    "test": 7,
    "instances": 8,
}

SEED_MAX = 2**64 - 1


def check_seed(seed: int) -> int:
    if isinstance(seed, bool) or not isinstance(seed, numbers.Integral):
        raise ValidationError(f"seed must be an integer, got {seed!r}")
    seed = int(seed)
    if not 0 <= seed <= SEED_MAX:
        raise ValidationError(f"seed must be a 64-bit unsigned integer, got {seed}")
    return seed


def stream(seed: int, name: str, *path: int) -> np.random.Generator:
    """Return the generator for substream ``name`` (optionally sub-indexed by ``path``)."""
    if name not in STREAMS:
        raise ValidationError(f"unknown stream {name!r}")
    key = (STREAMS[name],) + tuple(int(p) for p in path)
    ss = np.random.SeedSequence(check_seed(seed), spawn_key=key)
    return np.random.Generator(np.random.Philox(ss))


def derive_seed(seed: int, *path: int) -> int:
    """Child 64-bit seed at ``path`` below ``seed`` (fixed derivation tree)."""
    ss = np.random.SeedSequence(check_seed(seed), spawn_key=tuple(int(p) for p in path))
    return int(ss.generate_state(1, dtype=np.uint64)[0])
