"""Directed left-to-right crossings of a retained grid.

A crossing is a sequence of retained unit cells from column 1 to the last
column where consecutive cells share an edge and the column index never
decreases: allowed moves are up, down, and right ('udr'), or up and right
for the monotone variant ('ur').  Diagonal contact does not connect.

The production detector sweeps column by column keeping the reachable set
as a sorted list of disjoint row intervals.  With moves 'udr' every
reachable interval is a complete maximal retained run, so the state after
column j is just "which runs of column j were entered"; with 'ur' an
entered run is reachable from its lowest entry row upward.  A separate
breadth-first search over cells, written against the definition and not
sharing the interval bookkeeping, serves as the oracle in tests.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .lattice import GridConfig, sample_retained_bits
from .schedule import Schedule

__all__ = [
    "column_runs",
    "reach_intervals",
    "has_crossing",
    "crossing_witness",
    "is_valid_crossing",
    "crossing_oracle_bfs",
    "crossing_oracle_bfs_batch",
    "CrossingEstimate",
    "crossing_probability",
]

MOVE_SETS = ("udr", "ur")


def column_runs(col: np.ndarray) -> list[tuple[int, int]]:
    """Maximal True runs of a 1-d bool array as (lo, hi), 0-based inclusive."""
    idx = np.flatnonzero(col)
    if idx.size == 0:
        return []
    cut = np.flatnonzero(np.diff(idx) > 1)
    starts = np.concatenate(([idx[0]], idx[cut + 1]))
    ends = np.concatenate((idx[cut], [idx[-1]]))
    return [(int(a), int(b)) for a, b in zip(starts, ends)]


def _start_window(bits: np.ndarray, start_rows: tuple[int, int] | None) -> tuple[int, int]:
    h = bits.shape[1]
    if start_rows is None:
        return 0, h - 1
    lo, hi = start_rows
    if not (1 <= lo <= hi <= h):
        raise ValueError(f"start rows {start_rows} outside 1..{h}")
    return lo - 1, hi - 1


def _check_moves(moves: str) -> None:
    if moves not in MOVE_SETS:
        raise ValueError(f"moves must be one of {MOVE_SETS}, got {moves!r}")


def _sweep(bits, start_rows, moves, track):
    """Column sweep.  Returns (columns, trace) where columns[j] is the sorted
    reachable interval list after column j (empty list once unreachable and
    for all later columns), and trace carries (door, parent) per interval
    when track is set."""
    _check_moves(moves)
    w = bits.shape[0]
    s_lo, s_hi = _start_window(bits, start_rows)
    columns: list[list[tuple[int, int]]] = []
    trace: list[list[tuple[int, int]]] = []

    cur: list[tuple[int, int]] = []
    cur_tr: list[tuple[int, int]] = []
    for lo, hi in column_runs(bits[0]):
        e_lo = max(lo, s_lo)
        if e_lo > min(hi, s_hi):
            continue
        ival = (lo, hi) if moves == "udr" else (e_lo, hi)
        cur.append(ival)
        if track:
            cur_tr.append((e_lo, -1))
    columns.append(cur)
    if track:
        trace.append(cur_tr)

    for j in range(1, w):
        prev = cur
        nxt: list[tuple[int, int]] = []
        nxt_tr: list[tuple[int, int]] = []
        if prev:
            i = 0
            for lo, hi in column_runs(bits[j]):
                # First previous interval overlapping this run; intervals and
                # runs are both sorted, so the scan pointer only advances.
                while i < len(prev) and prev[i][1] < lo:
                    i += 1
                if i == len(prev) or prev[i][0] > hi:
                    continue
                door = max(lo, prev[i][0])
                ival = (lo, hi) if moves == "udr" else (door, hi)
                nxt.append(ival)
                if track:
                    nxt_tr.append((door, i))
        columns.append(nxt)
        if track:
            trace.append(nxt_tr)
        cur = nxt
    return columns, (trace if track else None)


def reach_intervals(
    bits: np.ndarray,
    start_rows: tuple[int, int] | None = None,
    moves: str = "udr",
) -> list[list[tuple[int, int]]]:
    """Reachable row intervals per column (0-based inclusive rows)."""
    columns, _ = _sweep(bits, start_rows, moves, track=False)
    return columns


def has_crossing(
    bits: np.ndarray,
    start_rows: tuple[int, int] | None = None,
    moves: str = "udr",
) -> bool:
    columns, _ = _sweep(bits, start_rows, moves, track=False)
    return bool(columns[-1])


def crossing_witness(
    bits: np.ndarray,
    start_rows: tuple[int, int] | None = None,
    moves: str = "udr",
) -> list[tuple[int, int]] | None:
    """An explicit crossing path as 1-based (col, row) cells, or None.

    The path enters each column at its door row, then walks vertically to
    the next door.  It is validated by is_valid_crossing in tests.
    """
    columns, trace = _sweep(bits, start_rows, moves, track=True)
    if not columns[-1]:
        return None
    w = bits.shape[0]
    # Walk parents back from the last column, recording each column's door.
    doors = [0] * w
    idx = 0
    for j in range(w - 1, -1, -1):
        door, parent = trace[j][idx]
        doors[j] = door
        idx = parent
    path: list[tuple[int, int]] = [(1, doors[0] + 1)]
    for j in range(1, w):
        # Vertical slide within column j (0-based j-1... previous column) to
        # the row adjacent to the next door, then step right.
        here = path[-1][1] - 1
        target = doors[j]
        step = 1 if target > here else -1
        for row in range(here + step, target + step, step):
            path.append((j, row + 1))
        path.append((j + 1, target + 1))
    return path


def is_valid_crossing(
    bits: np.ndarray,
    path: list[tuple[int, int]],
    start_rows: tuple[int, int] | None = None,
    moves: str = "udr",
) -> bool:
    """Check a path against the definition directly."""
    _check_moves(moves)
    if not path:
        return False
    w, h = bits.shape
    s_lo, s_hi = _start_window(bits, start_rows)
    c0, r0 = path[0]
    if c0 != 1 or not (s_lo <= r0 - 1 <= s_hi):
        return False
    if path[-1][0] != w:
        return False
    for c, r in path:
        if not (1 <= c <= w and 1 <= r <= h) or not bits[c - 1, r - 1]:
            return False
    allowed = {(0, 1), (0, -1), (1, 0)} if moves == "udr" else {(0, 1), (1, 0)}
    for (c1, r1), (c2, r2) in zip(path, path[1:]):
        if (c2 - c1, r2 - r1) not in allowed:
            return False
    return True


def crossing_oracle_bfs(
    bits: np.ndarray,
    start_rows: tuple[int, int] | None = None,
    moves: str = "udr",
) -> bool:
    """Fixed-point dilation over cells; independent of the interval sweep."""
    _check_moves(moves)
    s_lo, s_hi = _start_window(bits, start_rows)
    visited = np.zeros_like(bits)
    visited[0, s_lo : s_hi + 1] = bits[0, s_lo : s_hi + 1]
    frontier = visited.copy()
    while frontier.any():
        nxt = np.zeros_like(bits)
        nxt[:, 1:] |= frontier[:, :-1]  # up
        if moves == "udr":
            nxt[:, :-1] |= frontier[:, 1:]  # down
        nxt[1:, :] |= frontier[:-1, :]  # right
        nxt &= bits & ~visited
        visited |= nxt
        frontier = nxt
    return bool(visited[-1].any())


def crossing_oracle_bfs_batch(
    batch: np.ndarray,
    start_rows: tuple[int, int] | None = None,
    moves: str = "udr",
) -> np.ndarray:
    """Vectorised oracle over a (trials, W, H) stack of grids."""
    _check_moves(moves)
    s_lo, s_hi = _start_window(batch[0], start_rows)
    visited = np.zeros_like(batch)
    visited[:, 0, s_lo : s_hi + 1] = batch[:, 0, s_lo : s_hi + 1]
    frontier = visited.copy()
    while frontier.any():
        nxt = np.zeros_like(batch)
        nxt[:, :, 1:] |= frontier[:, :, :-1]
        if moves == "udr":
            nxt[:, :, :-1] |= frontier[:, :, 1:]
        nxt[:, 1:, :] |= frontier[:, :-1, :]
        nxt &= batch & ~visited
        visited |= nxt
        frontier = nxt
    return visited[:, -1, :].any(axis=1)


@dataclass(frozen=True)
class CrossingEstimate:
    n: int
    r: int
    schedule: str
    trials: int
    hits: int
    p_hat: float
    se: float
    ci95: tuple[float, float]

    def to_json_dict(self) -> dict:
        return {
            "n": self.n,
            "r": self.r,
            "schedule": self.schedule,
            "trials": self.trials,
            "hits": self.hits,
            "p_hat": self.p_hat,
            "se": self.se,
            "ci95": list(self.ci95),
        }


def crossing_probability(
    cfg: GridConfig,
    schedule: Schedule,
    trials: int,
    seed: int,
    moves: str = "udr",
) -> CrossingEstimate:
    """Monte Carlo estimate of the directed crossing probability."""
    if trials < 1:
        raise ValueError("need at least one trial")
    hits = 0
    for t in range(trials):
        bits = sample_retained_bits(cfg, schedule, seed, trial=t)
        hits += has_crossing(bits, moves=moves)
    p_hat = hits / trials
    se = (p_hat * (1.0 - p_hat) / trials) ** 0.5
    return CrossingEstimate(
        n=cfg.n,
        r=cfg.r,
        schedule=schedule.spec_string(),
        trials=trials,
        hits=hits,
        p_hat=p_hat,
        se=se,
        ci95=(p_hat - 1.96 * se, p_hat + 1.96 * se),
    )
