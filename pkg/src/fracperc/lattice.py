"""Lattice geometry, vacancy sampling, and retained-grid construction.

All geometry is exact integer arithmetic in level-r units: the finest
squares have side 1 and a level-k square has side n**(r - k) units.
Squares are keyed (level, col, row) with 1-based col/row counted from the
lower-left corner of the region.  Regions are [0, width] x [0, height]
in units; width and height must be divisible by the coarsest square side
so every level tiles the region exactly.

Each level-k square is vacant independently with probability 1 - p_k.
Vacancy of a square is decided by a counter-based hash of
(seed, trial, level, col, row), compared against a threshold derived from
p_k.  Consequences used throughout the package:

* resampling a taller or wider region extends a sample without changing
  the part already seen,
* increasing any p_k removes vacancies without adding new ones
  (monotone coupling), and
* samples at depth r and r + 1 share the vacancies of levels <= r
  (refinement coupling), since keys do not involve r.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterator, NamedTuple

import numpy as np

from .rng import Stream, derive_key, square_grid_values, square_value, vacancy_threshold
from .schedule import Schedule

__all__ = [
    "Square",
    "GridConfig",
    "VacancySet",
    "RetainedGrid",
    "square_bounds",
    "sample_vacancy_masks",
    "sample_vacancies",
    "build_retained",
    "retained_bits_from_masks",
    "sample_retained_bits",
    "retained_fraction",
]


class Square(NamedTuple):
    level: int
    col: int
    row: int


@dataclass(frozen=True)
class GridConfig:
    """Discretisation parameters for one sampled region.

    n      subdivision factor (>= 2)
    r      finest level; one unit = side of a level-r square
    width  region width in units
    height region height in units
    k_min, k_max   levels whose vacancies participate (1 <= k_min <= k_max <= r)
    """

    n: int
    r: int
    width: int
    height: int
    k_min: int
    k_max: int

    def __post_init__(self):
        if self.n < 2:
            raise ValueError(f"subdivision factor must be >= 2, got {self.n}")
        if self.r < 1:
            raise ValueError(f"depth must be >= 1, got {self.r}")
        if not (1 <= self.k_min <= self.k_max <= self.r):
            raise ValueError(
                f"need 1 <= k_min <= k_max <= r, got ({self.k_min}, {self.k_max}, {self.r})"
            )
        if self.width < 1 or self.height < 1:
            raise ValueError("region must be nonempty")
        coarse = self.side(self.k_min)
        if self.width % coarse or self.height % coarse:
            raise ValueError(
                f"region {self.width}x{self.height} not divisible by coarsest side {coarse}"
            )

    def side(self, level: int) -> int:
        """Side of a level square, in units."""
        return self.n ** (self.r - level)

    def levels(self) -> range:
        return range(self.k_min, self.k_max + 1)

    def level_shape(self, level: int) -> tuple[int, int]:
        s = self.side(level)
        return self.width // s, self.height // s

    @staticmethod
    def unit_square(n: int, r: int, levels: tuple[int, int] | None = None) -> "GridConfig":
        k_min, k_max = levels if levels is not None else (1, r)
        w = n ** r
        return GridConfig(n=n, r=r, width=w, height=w, k_min=k_min, k_max=k_max)

    @staticmethod
    def strip(
        n: int, r: int, k: int, bands: int = 4, levels: tuple[int, int] | None = None
    ) -> "GridConfig":
        """Vertical strip of width one level-k square and height `bands` of them."""
        k_min, k_max = levels if levels is not None else (k, r)
        s = n ** (r - k)
        return GridConfig(n=n, r=r, width=s, height=bands * s, k_min=k_min, k_max=k_max)


def square_bounds(cfg: GridConfig, sq: Square) -> tuple[int, int, int, int]:
    """(left, right, bottom, top) of a square in units."""
    s = cfg.side(sq.level)
    return ((sq.col - 1) * s, sq.col * s, (sq.row - 1) * s, sq.row * s)


@dataclass(frozen=True, eq=False)
class VacancySet:
    """Vacant squares of one sample, grouped by level.

    Per level the squares are stored as an (m, 2) int64 array of
    (col, row) pairs in lexicographic order.
    """

    cfg: GridConfig
    per_level: dict[int, np.ndarray] = field(repr=False)

    def __post_init__(self):
        for k in self.cfg.levels():
            if k not in self.per_level:
                raise ValueError(f"missing level {k}")
            arr = self.per_level[k]
            if arr.ndim != 2 or arr.shape[1] != 2:
                raise ValueError(f"level {k}: expected (m, 2) array, got {arr.shape}")

    @property
    def levels(self) -> range:
        return self.cfg.levels()

    def arrays(self, level: int) -> tuple[np.ndarray, np.ndarray]:
        arr = self.per_level[level]
        return arr[:, 0], arr[:, 1]

    def count(self, level: int) -> int:
        return self.per_level[level].shape[0]

    def total(self) -> int:
        return sum(self.count(k) for k in self.levels)

    def contains(self, sq: Square) -> bool:
        arr = self.per_level.get(sq.level)
        if arr is None or arr.shape[0] == 0:
            return False
        idx = np.searchsorted(arr[:, 0] * (2 ** 32) + arr[:, 1], sq.col * (2 ** 32) + sq.row)
        if idx >= arr.shape[0]:
            return False
        return arr[idx, 0] == sq.col and arr[idx, 1] == sq.row

    def squares(self, level: int) -> list[Square]:
        return [Square(level, int(c), int(r)) for c, r in self.per_level[level]]

    def all_squares(self) -> Iterator[Square]:
        for k in self.levels:
            yield from self.squares(k)

    @staticmethod
    def from_squares(cfg: GridConfig, squares) -> "VacancySet":
        per: dict[int, list[tuple[int, int]]] = {k: [] for k in cfg.levels()}
        for sq in squares:
            if sq.level not in per:
                raise ValueError(f"square level {sq.level} outside config levels")
            ncols, nrows = cfg.level_shape(sq.level)
            if not (1 <= sq.col <= ncols and 1 <= sq.row <= nrows):
                raise ValueError(f"square {sq} outside region")
            per[sq.level].append((sq.col, sq.row))
        per_level = {
            k: np.array(sorted(set(v)), dtype=np.int64).reshape(-1, 2)
            for k, v in per.items()
        }
        return VacancySet(cfg=cfg, per_level=per_level)

    def __eq__(self, other) -> bool:
        if not isinstance(other, VacancySet):
            return NotImplemented
        if self.cfg != other.cfg:
            return False
        return all(
            np.array_equal(self.per_level[k], other.per_level[k]) for k in self.levels
        )


def _level_key(seed: int, trial: int, level: int) -> int:
    return derive_key(seed, Stream.VACANCY, trial, level)


def sample_vacancy_masks(
    cfg: GridConfig, schedule: Schedule, seed: int, trial: int = 0
) -> dict[int, np.ndarray]:
    """Boolean vacancy mask per level, shape (ncols, nrows), [c-1, r-1] indexed."""
    masks = {}
    for k in cfg.levels():
        ncols, nrows = cfg.level_shape(k)
        thr = vacancy_threshold(schedule.p(k))
        if thr is None:
            masks[k] = np.zeros((ncols, nrows), dtype=bool)
        else:
            h = square_grid_values(_level_key(seed, trial, k), ncols, nrows)
            masks[k] = h >= np.uint64(thr)
    return masks


def is_vacant(cfg: GridConfig, schedule: Schedule, seed: int, trial: int, sq: Square) -> bool:
    """Scalar check mirroring sample_vacancy_masks bit for bit."""
    thr = vacancy_threshold(schedule.p(sq.level))
    if thr is None:
        return False
    return square_value(_level_key(seed, trial, sq.level), sq.col, sq.row) >= thr


def sample_vacancies(
    cfg: GridConfig, schedule: Schedule, seed: int, trial: int = 0
) -> VacancySet:
    masks = sample_vacancy_masks(cfg, schedule, seed, trial)
    per_level = {}
    for k, mask in masks.items():
        idx = np.argwhere(mask)
        per_level[k] = (idx + 1).astype(np.int64)
    return VacancySet(cfg=cfg, per_level=per_level)


@dataclass(frozen=True)
class RetainedGrid:
    """Retention indicator at unit resolution; bits[x, y] for 0-based units."""

    cfg: GridConfig
    bits: np.ndarray

    def fraction(self) -> float:
        return float(self.bits.mean())


def build_retained(cfg: GridConfig, vac: VacancySet) -> RetainedGrid:
    """Paint vacancies onto a unit-resolution grid, coarsest level first."""
    bits = np.ones((cfg.width, cfg.height), dtype=bool)
    for k in cfg.levels():
        s = cfg.side(k)
        cols, rows = vac.arrays(k)
        for c, rw in zip(cols, rows):
            bits[(c - 1) * s : c * s, (rw - 1) * s : rw * s] = False
    return RetainedGrid(cfg=cfg, bits=bits)


def retained_bits_from_masks(cfg: GridConfig, masks: dict[int, np.ndarray]) -> np.ndarray:
    """Combine per-level masks into the unit-resolution retention grid.

    Equivalent to build_retained(cfg, vacancies(masks)).bits but works on
    whole levels at once.
    """
    ks = sorted(masks)
    bits = ~masks[ks[0]]
    for k in ks[1:]:
        bits = bits.repeat(cfg.n, axis=0).repeat(cfg.n, axis=1) & ~masks[k]
    f = cfg.side(ks[-1])
    if f > 1:
        bits = bits.repeat(f, axis=0).repeat(f, axis=1)
    return bits


def sample_retained_bits(
    cfg: GridConfig, schedule: Schedule, seed: int, trial: int = 0
) -> np.ndarray:
    return retained_bits_from_masks(cfg, sample_vacancy_masks(cfg, schedule, seed, trial))


def retained_fraction(
    cfg: GridConfig, schedule: Schedule, seed: int, trial: int = 0
) -> float:
    """Retained area fraction; skips the final upscale (it preserves the mean)."""
    masks = sample_vacancy_masks(cfg, schedule, seed, trial)
    ks = sorted(masks)
    bits = ~masks[ks[0]]
    for k in ks[1:]:
        bits = bits.repeat(cfg.n, axis=0).repeat(cfg.n, axis=1) & ~masks[k]
    return float(bits.mean())
