"""Deterministic chunked sampling shared by the sign checker and the integrators.

Chunk ``k`` always draws from ``default_rng([seed, k])``, so results do not
depend on how many workers process the chunks.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from typing import Callable, Iterable, TypeVar

import numpy as np

CHUNK = 4096

T = TypeVar("T")


def chunk_rng(seed: int, k: int) -> np.random.Generator:
    return np.random.default_rng([int(seed) & 0xFFFFFFFF, k])


def chunk_sizes(n: int, chunk: int = CHUNK) -> list[int]:
    full, rem = divmod(n, chunk)
    return [chunk] * full + ([rem] if rem else [])


def map_chunks(fn: Callable[[int, int], T], n: int, workers: int = 1, chunk: int = CHUNK) -> list[T]:
    """Apply ``fn(k, size)`` to every chunk and return results in chunk order."""
    sizes = chunk_sizes(n, chunk)
    if workers <= 1 or len(sizes) <= 1:
        return [fn(k, s) for k, s in enumerate(sizes)]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, range(len(sizes)), sizes))


def unit_directions(rng: np.random.Generator, size: int, n: int) -> np.ndarray:
    g = rng.standard_normal((size, n))
    norms = np.linalg.norm(g, axis=1)
    norms[norms == 0] = 1.0
    return g / norms[:, None]


def uniform_ball(rng: np.random.Generator, size: int, n: int, radius: float = 1.0) -> np.ndarray:
    """Uniform points in the ball: Gaussian direction times ``radius * U^(1/n)``."""
    u = unit_directions(rng, size, n)
    r = radius * rng.random(size) ** (1.0 / n)
    return u * r[:, None]


def uniform_shell(rng: np.random.Generator, size: int, n: int, r_in: float, r_out: float) -> np.ndarray:
    u = unit_directions(rng, size, n)
    s = rng.random(size)
    r = (r_in**n + s * (r_out**n - r_in**n)) ** (1.0 / n)
    return u * r[:, None]


def ball_volume(n: int, radius: float = 1.0) -> float:
    return math.pi ** (n / 2) / math.gamma(n / 2 + 1) * radius**n


def sphere_area(n: int, radius: float = 1.0) -> float:
    return 2 * math.pi ** (n / 2) / math.gamma(n / 2) * radius ** (n - 1)


def first_true(flags: Iterable[np.ndarray]) -> tuple[int, int] | None:
    """``(chunk, index)`` of the first ``True`` across chunk-ordered flag arrays."""
    for k, f in enumerate(flags):
        idx = np.flatnonzero(f)
        if idx.size:
            return k, int(idx[0])
    return None
