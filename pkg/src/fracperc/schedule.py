"""Level-dependent retention schedules.

A schedule assigns each subdivision level k >= 1 a retention probability
p_k in (0, 1].  The log-rates theta_k = -log p_k and their partial sums
drive every closed-form bound, so those are exposed here too.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

__all__ = [
    "Schedule",
    "ScheduleError",
    "parse_schedule",
    "theta_sums",
    "POWERLAW_FLOOR",
]

# p_k for a power-law schedule is clamped away from zero at this floor so
# theta_k stays finite for every k.
POWERLAW_FLOOR = 1e-9


class ScheduleError(ValueError):
    pass


def _check_prob(p: float, what: str) -> float:
    p = float(p)
    if not math.isfinite(p) or not (0.0 < p <= 1.0):
        raise ScheduleError(f"{what} must lie in (0, 1], got {p!r}")
    return p


@dataclass(frozen=True)
class Schedule:
    """Retention probabilities p_k indexed by level k >= 1.

    Use the constructors below; the fields are an internal encoding.
    """

    kind: str
    p_const: float | None = None
    coeff: float | None = None
    alpha: float | None = None
    probs: tuple[float, ...] | None = None

    @staticmethod
    def constant(p: float) -> "Schedule":
        return Schedule(kind="constant", p_const=_check_prob(p, "constant p"))

    @staticmethod
    def harmonic() -> "Schedule":
        """p_k = k / (k + 1); theta sums telescope to log(r + 1)."""
        return Schedule(kind="harmonic")

    @staticmethod
    def powerlaw(coeff: float, alpha: float) -> "Schedule":
        """p_k = max(FLOOR, 1 - coeff * alpha**(-k)); needs coeff > 0, alpha > 1."""
        coeff = float(coeff)
        alpha = float(alpha)
        if not (math.isfinite(coeff) and coeff > 0.0):
            raise ScheduleError(f"powerlaw coefficient must be positive, got {coeff!r}")
        if not (math.isfinite(alpha) and alpha > 1.0):
            raise ScheduleError(f"powerlaw alpha must exceed 1, got {alpha!r}")
        return Schedule(kind="powerlaw", coeff=coeff, alpha=alpha)

    @staticmethod
    def explicit(probs) -> "Schedule":
        vals = tuple(_check_prob(p, "explicit p_k") for p in probs)
        if not vals:
            raise ScheduleError("explicit schedule needs at least one probability")
        return Schedule(kind="explicit", probs=vals)

    def p(self, k: int) -> float:
        if k < 1:
            raise ScheduleError(f"levels are 1-based, got k={k}")
        if self.kind == "constant":
            return self.p_const
        if self.kind == "harmonic":
            return k / (k + 1)
        if self.kind == "powerlaw":
            return max(POWERLAW_FLOOR, 1.0 - self.coeff * self.alpha ** (-k))
        if self.kind == "explicit":
            if k > len(self.probs):
                raise ScheduleError(
                    f"explicit schedule has {len(self.probs)} levels, got k={k}"
                )
            return self.probs[k - 1]
        raise ScheduleError(f"unknown schedule kind {self.kind!r}")

    def theta(self, k: int) -> float:
        return -math.log(self.p(k))

    def spec_string(self) -> str:
        """Round-trippable text form (accepted by parse_schedule)."""
        if self.kind == "constant":
            return f"const:{self.p_const!r}"
        if self.kind == "harmonic":
            return "harmonic"
        if self.kind == "powerlaw":
            return f"powerlaw:{self.coeff!r},{self.alpha!r}"
        return "explicit:" + ",".join(repr(p) for p in self.probs)

    def __str__(self) -> str:
        return self.spec_string()


def parse_schedule(text: str) -> Schedule:
    """Parse 'const:P', 'harmonic', 'powerlaw:C,ALPHA', 'explicit:P1,P2,...'
    or 'file:PATH' (one probability per line, blank lines ignored)."""
    text = text.strip()
    if text == "harmonic":
        return Schedule.harmonic()
    head, sep, rest = text.partition(":")
    if not sep:
        raise ScheduleError(f"cannot parse schedule {text!r}")
    try:
        if head == "const":
            return Schedule.constant(float(rest))
        if head == "powerlaw":
            coeff_s, _, alpha_s = rest.partition(",")
            if not alpha_s:
                raise ScheduleError(f"powerlaw needs C,ALPHA, got {rest!r}")
            return Schedule.powerlaw(float(coeff_s), float(alpha_s))
        if head == "explicit":
            return Schedule.explicit(float(v) for v in rest.split(","))
        if head == "file":
            with open(rest, "r", encoding="utf-8") as fh:
                vals = [float(line) for line in fh if line.strip()]
            return Schedule.explicit(vals)
    except ScheduleError:
        raise
    except (ValueError, OSError) as exc:
        raise ScheduleError(f"cannot parse schedule {text!r}: {exc}") from exc
    raise ScheduleError(f"unknown schedule kind {head!r}")


def theta_sums(schedule: Schedule, r: int) -> list[float]:
    """Partial sums Theta_k = sum_{j<=k} theta_j for k = 0..r.

    Theta_0 = 0.  Every p_k is validated to be positive, so all entries
    are finite.
    """
    if r < 0:
        raise ScheduleError(f"r must be nonnegative, got {r}")
    out = [0.0]
    acc = 0.0
    for k in range(1, r + 1):
        acc += schedule.theta(k)
        out.append(acc)
    return out
