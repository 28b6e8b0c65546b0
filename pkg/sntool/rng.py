# sntool/rng.py
"""
Seeded randomness. Every solver instance owns one numpy Generator on the
PCG64 bit generator. Draw order is fixed so a run can be replayed:
the Bernoulli(p) branch first (when the method has one), then the uniform
row index.
"""
from __future__ import annotations

from typing import Optional

import numpy as np


def make_rng(seed: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(seed))


def draw_branch(rng: np.random.Generator, p: float) -> bool:
    """True with probability p."""
    return bool(rng.random() < p)


def draw_index(rng: np.random.Generator, n: int) -> int:
    return int(rng.integers(n))


def draw_san(rng: np.random.Generator, p: float, n: int) -> Optional[int]:
    """SAN draw: None for the averaging branch, otherwise a row index."""
    if draw_branch(rng, p):
        return None
    return draw_index(rng, n)
