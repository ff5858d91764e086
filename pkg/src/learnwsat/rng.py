"""Seeded random streams.

Every stochastic routine draws from a ``random.Random`` (MT19937) and
only calls ``random()`` on it, whose output sequence Python guarantees
to be reproducible across platforms and versions.  Independent
substreams are keyed by ``(seed, *keys)`` through numpy's SeedSequence,
so draw ``i`` of a dataset or run ``r`` of instance ``i`` never depends
on how many numbers other draws consumed.
"""
from __future__ import annotations

import random

import numpy as np


def derive_seed(seed: int, *keys: int) -> int:
    words = np.random.SeedSequence([int(seed) & 0xFFFFFFFFFFFFFFFF, *map(int, keys)]).generate_state(2)
    return int(words[0]) | (int(words[1]) << 32)


def substream(seed: int, *keys: int) -> random.Random:
    return random.Random(derive_seed(seed, *keys))


def randbelow(rng: random.Random, n: int) -> int:
    return int(rng.random() * n)


def choice(rng: random.Random, seq):
    return seq[int(rng.random() * len(seq))]


def sample_without_replacement(rng: random.Random, n: int, k: int) -> list[int]:
    """k distinct values from range(n) by a partial Fisher-Yates shuffle."""
    pool = list(range(n))
    for i in range(k):
        j = i + int(rng.random() * (n - i))
        pool[i], pool[j] = pool[j], pool[i]
    return pool[:k]


def shuffle(rng: random.Random, items: list) -> None:
    for i in range(len(items) - 1, 0, -1):
        j = int(rng.random() * (i + 1))
        items[i], items[j] = items[j], items[i]
