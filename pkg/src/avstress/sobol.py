"""Unscrambled Sobol sequence from Joe-Kuo direction numbers.

Indexing starts at 1; index 0 would be the all-zeros point, which is never
used as a sample. Supports up to 10 dimensions, which covers the search
cubes this package builds (2 coordinates per prompted agent).
"""
from __future__ import annotations

import numpy as np

_BITS = 32

# (degree s, coefficient bits a, initial m values), per dimension starting at
# the second; the first dimension is the base-2 van der Corput sequence.
_JOE_KUO = [
    (1, 0, [1]),
    (2, 1, [1, 3]),
    (3, 1, [1, 3, 1]),
    (3, 2, [1, 1, 1]),
    (4, 1, [1, 1, 3, 3]),
    (4, 4, [1, 3, 5, 13]),
    (5, 2, [1, 1, 5, 5, 17]),
    (5, 4, [1, 1, 5, 5, 5]),
    (5, 7, [1, 1, 7, 11, 19]),
]

MAX_DIM = len(_JOE_KUO) + 1


def _direction_numbers(dim: int) -> list[list[int]]:
    """Direction integers v_j << (BITS - j) for each of `dim` dimensions."""
    vs = []
    # first dimension: v_j = 2^(BITS - j)
    vs.append([1 << (_BITS - j) for j in range(1, _BITS + 1)])
    for s, a, m_init in _JOE_KUO[: dim - 1]:
        m = list(m_init)
        for j in range(s, _BITS):
            new = m[j - s] ^ (m[j - s] << s)
            for k in range(1, s):
                if (a >> (s - 1 - k)) & 1:
                    new ^= m[j - k] << k
            m.append(new)
        vs.append([m[j] << (_BITS - j - 1) for j in range(_BITS)])
    return vs


_CACHE: dict[int, list[list[int]]] = {}


def _dirs(dim: int) -> list[list[int]]:
    if dim not in _CACHE:
        if not (1 <= dim <= MAX_DIM):
            raise ValueError(f"dimension {dim} outside [1, {MAX_DIM}]")
        _CACHE[dim] = _direction_numbers(dim)
    return _CACHE[dim]


def sobol_point(index: int, dim: int = 2) -> tuple[float, ...]:
    """The index-th point (index >= 1) of the unscrambled Sobol sequence."""
    if index < 1:
        raise ValueError("sobol index must be >= 1")
    vs = _dirs(dim)
    gray = index ^ (index >> 1)
    out = []
    for d in range(dim):
        x = 0
        g = gray
        j = 0
        while g:
            if g & 1:
                x ^= vs[d][j]
            g >>= 1
            j += 1
        out.append(x / float(1 << _BITS))
    return tuple(out)


def sobol_points(n: int, dim: int = 2, start: int = 1) -> np.ndarray:
    """Points start .. start+n-1 of the sequence as an (n, dim) array."""
    return np.array([sobol_point(start + i, dim) for i in range(n)], dtype=float)
