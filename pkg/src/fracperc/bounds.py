"""Closed-form bounds on contour heights and crossing probabilities.

Everything here is deterministic arithmetic on a schedule; the Monte Carlo
side of each comparison lives in the experiment harness.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .schedule import Schedule, theta_sums

__all__ = [
    "contour_height_bound",
    "crossing_block_bound",
    "BoundRecord",
    "bound_record",
]


def _delta_theta(schedule: Schedule, k: int, r: int) -> float:
    if not (1 <= k <= r):
        raise ValueError(f"need 1 <= k <= r, got k={k}, r={r}")
    sums = theta_sums(schedule, r)
    return sums[r] - sums[k - 1]


def contour_height_bound(
    schedule: Schedule, n: int, k: int, r: int, interval: str = "strip"
) -> float:
    """Upper bound on the mean height of the lowest (k, r)-contour.

    interval 'strip' spans one level-k square width and gives
    2 * n**(-k) / (Theta_r - Theta_{k-1}); 'full' spans the whole unit
    width and drops the n**(-k) factor.  Heights are in real coordinates
    (unit square side 1).  Returns math.inf when the theta increment is
    zero, i.e. every p_j = 1 for k <= j <= r.
    """
    if interval not in ("strip", "full"):
        raise ValueError(f"interval must be 'strip' or 'full', got {interval!r}")
    dt = _delta_theta(schedule, k, r)
    scale = n ** (-k) if interval == "strip" else 1.0
    if dt == 0.0:
        return math.inf
    return 2.0 * scale / dt


def crossing_block_bound(schedule: Schedule, n: int, k: int, r: int) -> tuple[float, float]:
    """Bounds on the probability that no single-band blocking pattern occurs.

    Returns (explicit, simplified):
      explicit   = n**k * (4 * n**k / dTheta + (1 - (1 - p_k)**3) ** (n**k))
      simplified = n**k * exp(-n**k * (1 - p_k)**3)
    with dTheta = Theta_r - Theta_{k-1}.  The explicit form is math.inf
    when dTheta = 0; the simplified form never is.
    """
    dt = _delta_theta(schedule, k, r)
    p = schedule.p(k)
    m = n ** k
    q3 = (1.0 - p) ** 3
    simplified = m * math.exp(-m * q3)
    if dt == 0.0:
        return math.inf, simplified
    explicit = m * (4.0 * m / dt + (1.0 - q3) ** m)
    return explicit, simplified


@dataclass(frozen=True)
class BoundRecord:
    n: int
    k: int
    r: int
    kind: str  # 'contour' or 'crossing'
    interval: str | None
    bound: float
    simplified_bound: float | None
    theta_r: float

    def to_json_dict(self) -> dict:
        # JSON has no Infinity; encode it as null plus an explicit flag.
        inf = math.isinf(self.bound)
        return {
            "n": self.n,
            "k": self.k,
            "r": self.r,
            "kind": self.kind,
            "interval": self.interval,
            "bound": None if inf else self.bound,
            "infinite": inf,
            "simplified_bound": self.simplified_bound,
            "theta_r": self.theta_r,
        }


def bound_record(
    schedule: Schedule, n: int, k: int, r: int, kind: str, interval: str = "strip"
) -> BoundRecord:
    theta_r = theta_sums(schedule, r)[r]
    if kind == "contour":
        b = contour_height_bound(schedule, n, k, r, interval)
        return BoundRecord(n, k, r, "contour", interval, b, None, theta_r)
    if kind == "crossing":
        explicit, simplified = crossing_block_bound(schedule, n, k, r)
        return BoundRecord(n, k, r, "crossing", None, explicit, simplified, theta_r)
    raise ValueError(f"kind must be 'contour' or 'crossing', got {kind!r}")
