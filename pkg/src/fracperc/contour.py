"""Minimal contours over vacant squares.

A contour over the horizontal span [a, b] is a finite sequence of vacant
squares S_1, ..., S_m such that

  (i)   the left edge of S_1 lies on x = a and the right edge of S_m on
        x = b,
  (ii)  the right edge of S_i is colinear with the left edge of S_{i+1}
        (consecutive squares touch or overlap vertically across that
        line), enforced as top(S_{i+1}) >= bottom(S_i), and
  (iii) every square lies inside the sampled region.

Its height is the maximum of the bottom heights of its squares: the
highest point of the step function x -> bottom(S_i(x)).  The solver finds
the minimum height over all contours by binary searching a height
threshold h and checking feasibility with a left-to-right relaxation:
f[x] = minimal bottom of the last square among partial contours with
bottoms <= h ending exactly at x.  Keeping only the minimal last-bottom
per x is enough because a smaller bottom admits every continuation a
larger one does.

All coordinates are integer level-r units.  Heights relative to a
baseline v (contours whose first square has top >= v) may be negative;
nothing here clamps them, callers decide.
"""

from __future__ import annotations

import math
import os
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from numba import njit

from .lattice import GridConfig, Square, VacancySet, sample_vacancies
from .rng import Stream, derive_key, uniforms
from .schedule import Schedule

__all__ = [
    "Contour",
    "ContourResult",
    "lowest_contour_height",
    "min_contour_by_enumeration",
    "validate_contour",
    "reflect_vacancies",
    "reflect_square",
    "reflect_contour",
    "reflected_lowest_contour",
    "CoupledGap",
    "sample_coupled_gap",
    "sample_coupled_gaps",
    "leftmost_gap_count",
    "sampled_gap_count",
    "min_height_sampled",
    "concatenation_check",
    "BlockingCertificate",
    "blocking_certificate",
]

_INF = np.int64(np.iinfo(np.int64).max)


@dataclass(frozen=True)
class Contour:
    """A witness contour: squares ordered left to right."""

    squares: tuple[Square, ...]
    span: tuple[int, int]
    height: int


@dataclass(frozen=True)
class ContourResult:
    """Outcome of a minimal-contour search.

    height is the absolute maximal bottom in units (None when censored);
    cap is the height threshold that was in force; base is the reference
    height v, so height_above = height - base is the quantity bounded by
    the tail estimates (it may be negative, by design).
    """

    height: int | None
    censored: bool
    cap: int | None
    contour: "Contour | None"
    base: int = 0

    @property
    def height_above(self) -> int | None:
        if self.height is None:
            return None
        return self.height - self.base


class _SquareTable:
    __slots__ = ("lefts", "rights", "bottoms", "tops", "levels", "cols", "rows")

    def __init__(self, lefts, rights, bottoms, tops, levels, cols, rows):
        self.lefts = lefts
        self.rights = rights
        self.bottoms = bottoms
        self.tops = tops
        self.levels = levels
        self.cols = cols
        self.rows = rows

    @property
    def size(self) -> int:
        return self.lefts.shape[0]

    def square(self, i: int) -> Square:
        return Square(int(self.levels[i]), int(self.cols[i]), int(self.rows[i]))


def _resolve_levels(cfg: GridConfig, level_range) -> tuple[int, int]:
    if level_range is None:
        return cfg.k_min, cfg.k_max
    lo, hi = level_range
    lo = max(lo, cfg.k_min)
    hi = min(hi, cfg.k_max)
    if lo > hi:
        raise ValueError(f"level range {level_range} misses config levels {cfg.levels()}")
    return lo, hi


def _collect(vac: VacancySet, a: int, b: int, levels, band, height_cap) -> _SquareTable:
    cfg = vac.cfg
    lo, hi = levels
    parts = []
    for k in range(lo, hi + 1):
        s = cfg.side(k)
        cols, rows = vac.arrays(k)
        if cols.size == 0:
            continue
        left = (cols - 1) * s
        right = cols * s
        bottom = (rows - 1) * s
        top = rows * s
        keep = (left >= a) & (right <= b)
        if band is not None:
            keep &= (bottom >= band[0]) & (top <= band[1])
        if height_cap is not None:
            keep &= bottom <= height_cap
        if not keep.any():
            continue
        m = int(keep.sum())
        parts.append(
            (
                left[keep],
                right[keep],
                bottom[keep],
                top[keep],
                np.full(m, k, dtype=np.int64),
                cols[keep],
                rows[keep],
                np.full(m, s, dtype=np.int64),
            )
        )
    if not parts:
        empty = np.empty(0, dtype=np.int64)
        return _SquareTable(empty, empty, empty, empty, empty, empty, empty)
    if len(parts) == 1:
        # Per-level (col, row) pairs are stored lexicographically, which for a
        # constant side is exactly the (left, side desc, bottom) order below.
        return _SquareTable(*parts[0][:7])
    lefts, rights, bottoms, tops, lvls, cols, rows, sides = (
        np.concatenate([p[i] for p in parts]) for i in range(8)
    )
    # Witness tie-break: prefer the widest square, then the lowest bottom.
    order = np.lexsort((bottoms, -sides, lefts))
    return _SquareTable(
        lefts[order],
        rights[order],
        bottoms[order],
        tops[order],
        lvls[order],
        cols[order],
        rows[order],
    )


@njit(cache=True)
def _relax(lefts, rights, bottoms, tops, a, b, h_cap, v_min, f, parent):
    """One feasibility pass at threshold h_cap; fills f and parent.

    Squares arrive sorted by left edge, so every predecessor state is final
    before it is read.  Returns True when some partial contour reaches b.
    """
    f[:] = _INF
    parent[:] = -1
    for i in range(lefts.shape[0]):
        bi = bottoms[i]
        if bi > h_cap:
            continue
        left = lefts[i]
        if left == a:
            if tops[i] < v_min:
                continue
        else:
            fl = f[left - a]
            if fl == _INF or tops[i] < fl:
                continue
        ri = rights[i] - a
        if bi < f[ri]:
            f[ri] = bi
            parent[ri] = i
    return f[b - a] != _INF


def _censored(height_cap, base) -> ContourResult:
    return ContourResult(None, True, height_cap, None, base=base)


def lowest_contour_height(
    vac: VacancySet,
    span: tuple[int, int],
    level_range: tuple[int, int] | None = None,
    height_cap: int | None = None,
    first_top_min: int = 0,
    band: tuple[int, int] | None = None,
) -> ContourResult:
    """Minimal contour height over span, with a witness.

    height_cap restricts the search to contours built from squares with
    bottom <= height_cap; when no such contour exists the result is
    censored (the true minimum, if any, exceeds the cap).  first_top_min
    demands top(S_1) >= v.  band restricts all squares to
    band[0] <= bottom, top <= band[1].
    """
    cfg = vac.cfg
    a, b = int(span[0]), int(span[1])
    if not (0 <= a < b <= cfg.width):
        raise ValueError(f"span {span} outside region width {cfg.width}")
    levels = _resolve_levels(cfg, level_range)
    table = _collect(vac, a, b, levels, band, height_cap)
    if table.size == 0:
        return _censored(height_cap, first_top_min)
    cand = np.unique(table.bottoms)
    f = np.empty(b - a + 1, dtype=np.int64)
    parent = np.empty(b - a + 1, dtype=np.int64)

    args = (table.lefts, table.rights, table.bottoms, table.tops,
            np.int64(a), np.int64(b))
    v = np.int64(first_top_min)
    if not _relax(*args, np.int64(cand[-1]), v, f, parent):
        return _censored(height_cap, first_top_min)
    lo, hi = 0, cand.shape[0] - 1
    while lo < hi:
        mid = (lo + hi) // 2
        if _relax(*args, np.int64(cand[mid]), v, f, parent):
            hi = mid
        else:
            lo = mid + 1
    h = int(cand[lo])
    _relax(*args, np.int64(h), v, f, parent)

    squares = []
    witness_max = None
    x = b
    guard = 0
    while x != a:
        i = int(parent[x - a])
        assert i >= 0, "witness chain broken"
        squares.append(table.square(i))
        bi = int(table.bottoms[i])
        witness_max = bi if witness_max is None else max(witness_max, bi)
        x = int(table.lefts[i])
        guard += 1
        assert guard <= b - a, "witness chain does not terminate"
    squares.reverse()
    # The threshold search is tight: the witness realises it exactly.
    assert witness_max == h, (witness_max, h)
    contour = Contour(squares=tuple(squares), span=(a, b), height=h)
    return ContourResult(h, False, height_cap, contour, base=first_top_min)


def validate_contour(
    cfg: GridConfig,
    vac: VacancySet,
    contour: Contour,
    first_top_min: int | None = None,
    band: tuple[int, int] | None = None,
) -> None:
    """Raise if the witness violates any contour condition."""
    from .lattice import square_bounds

    a, b = contour.span
    sqs = contour.squares
    if not sqs:
        raise ValueError("empty contour")
    prev_bottom = None
    x = a
    max_bottom = -(10 ** 18)
    for i, sq in enumerate(sqs):
        if not vac.contains(sq):
            raise ValueError(f"{sq} not vacant")
        left, right, bottom, top = square_bounds(cfg, sq)
        if left != x:
            raise ValueError(f"square {i} left edge {left} != expected {x}")
        if i == 0:
            if first_top_min is not None and top < first_top_min:
                raise ValueError(f"first top {top} < required {first_top_min}")
        else:
            if top < prev_bottom:
                raise ValueError(f"square {i} top {top} < previous bottom {prev_bottom}")
        if band is not None and not (band[0] <= bottom and top <= band[1]):
            raise ValueError(f"square {i} outside band {band}")
        prev_bottom = bottom
        max_bottom = max(max_bottom, bottom)
        x = right
    if x != b:
        raise ValueError(f"contour ends at {x}, span needs {b}")
    if max_bottom != contour.height:
        raise ValueError(f"recorded height {contour.height} != max bottom {max_bottom}")


def min_contour_by_enumeration(
    vac: VacancySet,
    span: tuple[int, int],
    level_range: tuple[int, int] | None = None,
    height_cap: int | None = None,
    first_top_min: int = 0,
    band: tuple[int, int] | None = None,
) -> int | None:
    """Exhaustive minimal height by depth-first search over all contours.

    Branch-and-bound on the running maximum is exact for a min-of-max
    objective.  Exponential in general; meant for small test regions.
    """
    from .lattice import square_bounds

    cfg = vac.cfg
    a, b = int(span[0]), int(span[1])
    levels = _resolve_levels(cfg, level_range)
    by_left: dict[int, list[tuple[int, int, int]]] = {}
    for k in range(levels[0], levels[1] + 1):
        for sq in vac.squares(k):
            left, right, bottom, top = square_bounds(cfg, sq)
            if left < a or right > b:
                continue
            if band is not None and not (band[0] <= bottom and top <= band[1]):
                continue
            if height_cap is not None and bottom > height_cap:
                continue
            by_left.setdefault(left, []).append((bottom, top, right))
    for lst in by_left.values():
        lst.sort()

    best: list[int | None] = [None]

    def extend(x: int, min_top: int, running_max: int) -> None:
        if best[0] is not None and running_max >= best[0]:
            return
        if x == b:
            best[0] = running_max
            return
        for bottom, top, right in by_left.get(x, ()):
            if top >= min_top:
                extend(right, bottom, max(running_max, bottom))

    extend(a, first_top_min, -(10 ** 18))
    return best[0]


# -- reflection ---------------------------------------------------------------


def reflect_vacancies(vac: VacancySet, band: tuple[int, int]) -> VacancySet:
    """Mirror, within the horizontal band, every vacant square lying fully
    inside it; squares outside the band are dropped."""
    cfg = vac.cfg
    y_lo, y_hi = band
    per = {}
    for k in cfg.levels():
        s = cfg.side(k)
        cols, rows = vac.arrays(k)
        bottom = (rows - 1) * s
        top = rows * s
        keep = (bottom >= y_lo) & (top <= y_hi)
        if not keep.any():
            per[k] = np.empty((0, 2), dtype=np.int64)
            continue
        if (y_lo + y_hi) % s:
            raise ValueError(f"band {band} not aligned to level {k} (side {s})")
        c2 = cols[keep]
        r2 = (y_lo + y_hi) // s - rows[keep] + 1
        order = np.lexsort((r2, c2))
        per[k] = np.stack([c2[order], r2[order]], axis=1).astype(np.int64)
    return VacancySet(cfg=cfg, per_level=per)


def reflect_square(cfg: GridConfig, band: tuple[int, int], sq: Square) -> Square:
    s = cfg.side(sq.level)
    y_lo, y_hi = band
    if (y_lo + y_hi) % s:
        raise ValueError(f"band {band} not aligned to level {sq.level}")
    return Square(sq.level, sq.col, (y_lo + y_hi) // s - sq.row + 1)


def reflect_contour(
    cfg: GridConfig, band: tuple[int, int], contour: Contour
) -> tuple[Square, ...]:
    """Witness squares of a mirrored-frame contour mapped back to the
    original frame (the sequence reads left to right either way)."""
    return tuple(reflect_square(cfg, band, sq) for sq in contour.squares)


def reflected_lowest_contour(
    vac: VacancySet,
    span: tuple[int, int],
    band: tuple[int, int],
    level_range: tuple[int, int] | None = None,
) -> ContourResult:
    """Minimal upside-down contour within a band: mirror the band, solve the
    ordinary problem, report in the mirrored frame."""
    return lowest_contour_height(reflect_vacancies(vac, band), span, level_range)


# -- single-column gap coupling ----------------------------------------------


@dataclass(frozen=True)
class CoupledGap:
    """One draw of the (Y, G) pair: Y exponential with rate theta and
    G = floor(Y), so that P[G >= l] = p**l for every integer l >= 0."""

    level: int
    theta: float
    y: float
    gap: int


def _gap_theta(schedule: Schedule, level: int) -> float:
    p = schedule.p(level)
    if p >= 1.0:
        raise ValueError(f"gap coupling needs p < 1 at level {level}")
    return -math.log(p)


def sample_coupled_gap(schedule: Schedule, level: int, seed: int, trial: int = 0) -> CoupledGap:
    theta = _gap_theta(schedule, level)
    u = uniforms(derive_key(seed, Stream.GAP, level), 1, start=trial)
    # np.log1p, not math.log1p: the two can differ in the last ulp and this
    # scalar path must reproduce sample_coupled_gaps element for element.
    y = float(-np.log1p(-u)[0] / theta)
    return CoupledGap(level=level, theta=theta, y=y, gap=int(math.floor(y)))


def sample_coupled_gaps(
    schedule: Schedule, level: int, seed: int, trials: int
) -> tuple[np.ndarray, np.ndarray]:
    theta = _gap_theta(schedule, level)
    u = uniforms(derive_key(seed, Stream.GAP, level), trials)
    y = -np.log1p(-u) / theta
    return y, np.floor(y).astype(np.int64)


def leftmost_gap_count(vac: VacancySet, level: int, v: int = 0) -> int | None:
    """Number of retained level squares in column 1 between height v and the
    first vacant one at or above it; None if no vacancy was sampled there.

    Counting starts at the square whose bottom is >= v (on a boundary, the
    higher of the two squares containing v)."""
    cfg = vac.cfg
    s = cfg.side(level)
    l0 = v // s + 1
    cols, rows = vac.arrays(level)
    sel = rows[(cols == 1) & (rows >= l0)]
    if sel.size == 0:
        return None
    return int(sel.min()) - l0


def _hard_cap_default() -> int:
    return int(os.environ.get("FRACPERC_HARD_CAP", "64"))


# GridConfig is frozen, so instances are safe to share across trials; the
# band-growing loops below would otherwise rebuild the same few configs
# hundreds of thousands of times.
@lru_cache(maxsize=512)
def _growth_cfg(n: int, r: int, width: int, height: int, lo: int, hi: int) -> GridConfig:
    return GridConfig(n=n, r=r, width=width, height=height, k_min=lo, k_max=hi)


def sampled_gap_count(
    schedule: Schedule,
    seed: int,
    trial: int,
    *,
    n: int,
    r: int,
    level: int,
    v: int = 0,
    start_bands: int = 4,
    hard_cap_bands: int | None = None,
) -> int | None:
    """Leftmost-column gap count G for one trial, extending the sampled
    column upward until the first vacancy appears (or the hard cap)."""
    hard = hard_cap_bands if hard_cap_bands is not None else _hard_cap_default()
    s = n ** (r - level)
    bands = start_bands
    while bands <= hard:
        cfg = _growth_cfg(n, r, s, bands * s, level, level)
        vac = sample_vacancies(cfg, schedule, seed, trial)
        g = leftmost_gap_count(vac, level, v)
        if g is not None:
            return g
        bands *= 2
    return None


def min_height_sampled(
    schedule: Schedule,
    seed: int,
    trial: int,
    *,
    n: int,
    r: int,
    levels: tuple[int, int],
    span: tuple[int, int],
    region_width: int | None = None,
    v: int = 0,
    start_bands: int = 4,
    hard_cap_bands: int | None = None,
) -> ContourResult:
    """Minimal contour height for one sampled half-strip trial.

    The strip is sampled to a finite height and regrown (doubling, starting
    at start_bands coarse squares) whenever the search is censored.  A found
    height is only trusted below the visibility threshold cap - side(lo):
    every square with a bottom under it is guaranteed to have been sampled.
    Trials still censored at the hard cap stay censored; the returned cap
    is then the last visibility threshold, a lower bound on the true height.
    """
    lo, hi = levels
    if not (1 <= lo <= hi <= r):
        raise ValueError(f"levels {levels} outside 1..{r}")
    band_unit = n ** (r - lo)
    width = region_width if region_width is not None else int(span[1])
    hard = hard_cap_bands if hard_cap_bands is not None else _hard_cap_default()
    bands = start_bands
    res = _censored(None, v)
    while bands <= hard:
        cfg = _growth_cfg(n, r, width, bands * band_unit, lo, hi)
        vac = sample_vacancies(cfg, schedule, seed, trial)
        visibility = bands * band_unit - band_unit
        res = lowest_contour_height(vac, span, height_cap=visibility, first_top_min=v)
        if not res.censored:
            return res
        bands *= 2
    return res


def concatenation_check(
    schedule: Schedule,
    seed: int,
    trial: int,
    *,
    n: int,
    r: int,
    k: int,
    v: int = 0,
    start_bands: int = 4,
    hard_cap_bands: int | None = None,
) -> dict | None:
    """Compare the strip height against chained sub-strip heights.

    Splits the width-s_k strip into its n level-(k+1) sub-strips, solves
    each at the running baseline v_i, and advances the baseline by the
    positive part of each relative height.  The chained contours then
    concatenate into one (k, r)-contour, so

        H_k(v) <= sum_i max(H^(i)(v_i), 0)

    must hold exactly.  Returns None when any sub-search hits the hard cap.
    """
    if not (1 <= k < r):
        raise ValueError(f"need 1 <= k < r, got k={k}, r={r}")
    w = n ** (r - k)
    subw = w // n
    common = dict(n=n, r=r, start_bands=start_bands, hard_cap_bands=hard_cap_bands)
    full = min_height_sampled(
        schedule, seed, trial, levels=(k, r), span=(0, w), v=v, **common
    )
    if full.censored:
        return None
    vi = v
    total = 0
    parts = []
    for i in range(n):
        sub = min_height_sampled(
            schedule,
            seed,
            trial,
            levels=(k + 1, r),
            span=(i * subw, (i + 1) * subw),
            region_width=w,
            v=vi,
            **common,
        )
        if sub.censored:
            return None
        rel = sub.height - vi
        parts.append(rel)
        gain = max(rel, 0)
        total += gain
        vi += gain
    return {
        "full": full.height - v,
        "parts": parts,
        "bound": total,
        "ok": full.height - v <= total,
    }


# -- blocking certificates -----------------------------------------------------


@dataclass(frozen=True)
class BlockingCertificate:
    """Witness that no directed crossing can start in one horizontal band.

    For band index i (counted in level-k rows), the certificate is an
    ordinary contour spanning the region inside band i+1, plus, for i >= 2,
    an upside-down contour inside band i-1 and a column whose level-k
    squares in rows i-1, i, i+1 are all vacant.  For i = 1 the floor of the
    region replaces the lower contour and a vacant pair in rows 1, 2
    replaces the triple.
    """

    found: bool
    n: int
    r: int
    level: int
    band_index: int
    start_rows: tuple[int, int]
    contour: Contour | None
    reflected: Contour | None
    reflected_squares: tuple[Square, ...] | None
    column: int | None

    def to_json_dict(self) -> dict:
        def sq_list(squares):
            return [[s.level, s.col, s.row] for s in squares]

        return {
            "found": self.found,
            "n": self.n,
            "r": self.r,
            "level": self.level,
            "band_index": self.band_index,
            "start_rows": list(self.start_rows),
            "contour": sq_list(self.contour.squares) if self.contour else None,
            "reflected": sq_list(self.reflected_squares) if self.reflected_squares else None,
            "column": self.column,
        }


def _aligned_column(vac: VacancySet, level: int, want_rows: tuple[int, ...]) -> int | None:
    cols, rows = vac.arrays(level)
    common: set[int] | None = None
    for rr in want_rows:
        here = set(cols[rows == rr].tolist())
        common = here if common is None else (common & here)
        if not common:
            return None
    return min(common) if common else None


def blocking_certificate(vac: VacancySet, k: int, i: int) -> BlockingCertificate:
    cfg = vac.cfg
    if cfg.width != cfg.height:
        raise ValueError("blocking certificates need a square region")
    if not (cfg.k_min <= k <= cfg.k_max):
        raise ValueError(f"level {k} outside config levels {cfg.levels()}")
    s = cfg.side(k)
    m = cfg.width // s
    if not (1 <= i <= m - 1):
        raise ValueError(f"band index must lie in 1..{m - 1}, got {i}")
    levels = (k, cfg.k_max)
    w = cfg.width

    upper = lowest_contour_height(vac, (0, w), levels, band=(i * s, (i + 1) * s))
    contour = upper.contour

    if i == 1:
        column = _aligned_column(vac, k, (1, 2))
        reflected = None
        reflected_sq = None
        found = contour is not None and column is not None
    else:
        low_band = ((i - 2) * s, (i - 1) * s)
        rres = reflected_lowest_contour(vac, (0, w), low_band, levels)
        reflected = rres.contour
        reflected_sq = reflect_contour(cfg, low_band, reflected) if reflected else None
        column = _aligned_column(vac, k, (i - 1, i, i + 1))
        found = contour is not None and reflected is not None and column is not None

    return BlockingCertificate(
        found=found,
        n=cfg.n,
        r=cfg.r,
        level=k,
        band_index=i,
        start_rows=((i - 1) * s + 1, i * s),
        contour=contour,
        reflected=reflected,
        reflected_squares=reflected_sq,
        column=column,
    )
