"""Deterministic counter-based random streams.

Every random quantity in the package is a pure function of a 64-bit master
seed plus integer coordinates (stream tag, trial index, level, column, row).
Values come from the splitmix64 finalizer applied to a folded key, so any
single value can be regenerated in isolation without drawing its neighbours.
That is what makes the coupled experiments work: two runs sharing a seed see
the same uniform at the same lattice site regardless of region size, height
cap, or evaluation order, and raising a retention probability can only
shrink the vacancy set.

Scalar helpers use plain Python ints (exact, no overflow warnings); the
vectorised helpers mirror them bit for bit with numpy uint64 arithmetic.
"""

from __future__ import annotations

import enum
import math

import numpy as np

MASK64 = (1 << 64) - 1
GOLDEN = 0x9E3779B97F4A7C15
_MIX_A = 0xBF58476D1CE4E5B9
_MIX_B = 0x94D049BB133111EB

_GOLDEN_U = np.uint64(GOLDEN)
_MIX_A_U = np.uint64(_MIX_A)
_MIX_B_U = np.uint64(_MIX_B)
_S30 = np.uint64(30)
_S27 = np.uint64(27)
_S31 = np.uint64(31)
_S11 = np.uint64(11)

# Resolution of a float64 uniform built from the top 53 bits.
_U01_SCALE = 2.0 ** -53


class Stream(enum.IntEnum):
    """Tags that keep independent sources of randomness from colliding."""

    VACANCY = 1
    GAP = 2
    TREE = 3
    LEMMA_Z = 4
    LEMMA_Y = 5
    GENERIC = 6


def mix64(x: int) -> int:
    """splitmix64 finalizer (a 64-bit bijection)."""
    x &= MASK64
    x ^= x >> 30
    x = (x * _MIX_A) & MASK64
    x ^= x >> 27
    x = (x * _MIX_B) & MASK64
    x ^= x >> 31
    return x


def mix64_arr(x: np.ndarray) -> np.ndarray:
    """Vectorised mix64 over a uint64 array; wraps modulo 2**64.

    uint64 *array* ufuncs wrap silently (only scalar-scalar ops warn on
    overflow), so no errstate guard is needed on this hot path.
    """
    x = x ^ (x >> _S30)
    x = x * _MIX_A_U
    x = x ^ (x >> _S27)
    x = x * _MIX_B_U
    return x ^ (x >> _S31)


def derive_key(seed: int, *words: int) -> int:
    """Fold integer coordinates into a 64-bit stream key.

    Each word is absorbed with an additive step followed by mix64, so the
    map is injective in every single word given the rest.
    """
    h = mix64(seed & MASK64)
    for w in words:
        h = mix64((h + (int(w) & MASK64)) & MASK64)
    return h


def square_value(key: int, col: int, row: int) -> int:
    """Hash value attached to one lattice square (1-based col, row)."""
    x = mix64((key + col * GOLDEN) & MASK64)
    return mix64((x + row * GOLDEN) & MASK64)


def square_grid_values(key: int, ncols: int, nrows: int) -> np.ndarray:
    """uint64 hash values for the full (ncols, nrows) grid of squares.

    Entry [c, r] equals square_value(key, c + 1, r + 1).
    """
    cols = np.arange(1, ncols + 1, dtype=np.uint64) * _GOLDEN_U
    rows = np.arange(1, nrows + 1, dtype=np.uint64) * _GOLDEN_U
    xc = mix64_arr(np.uint64(key) + cols)
    return mix64_arr(xc[:, None] + rows[None, :])


def indexed_values(key: int, n: int, start: int = 0) -> np.ndarray:
    """uint64 hash values for indices start..start+n-1 (a splitmix64 run)."""
    idx = np.arange(start + 1, start + n + 1, dtype=np.uint64)
    return mix64_arr(np.uint64(key) + idx * _GOLDEN_U)


def indexed_value(key: int, index: int) -> int:
    return mix64((key + (index + 1) * GOLDEN) & MASK64)


def u01(bits) -> np.ndarray | float:
    """Map 64-bit hashes to uniforms in [0, 1) using the top 53 bits."""
    if isinstance(bits, np.ndarray):
        return (bits >> _S11).astype(np.float64) * _U01_SCALE
    return (int(bits) >> 11) * _U01_SCALE


def uniforms(key: int, n: int, start: int = 0) -> np.ndarray:
    return u01(indexed_values(key, n, start))


def exponentials(key: int, n: int, mean: float, start: int = 0) -> np.ndarray:
    """iid Exponential(mean) draws; uses log1p so u = 0 stays finite."""
    if not (mean > 0.0 and math.isfinite(mean)):
        raise ValueError(f"exponential mean must be positive, got {mean}")
    return -mean * np.log1p(-uniforms(key, n, start))


def vacancy_threshold(p: float) -> int | None:
    """Hash threshold t with P[h >= t] = 1 - p for h uniform on 64 bits.

    Returns None for p == 1 (never vacant); the cutoff int(p * 2**64) is
    exact for every float64 p in (0, 1).
    """
    if not (0.0 < p <= 1.0):
        raise ValueError(f"retention probability must be in (0, 1], got {p}")
    if p == 1.0:
        return None
    return int(p * 2.0 ** 64)
