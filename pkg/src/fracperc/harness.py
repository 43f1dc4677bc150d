"""Experiment harness.

An experiment is a fully parameterised generator: trial t draws all of its
randomness from substreams of (master seed, t), so runs are reproducible
and individual trials can be replayed.  Trials are evaluated in fixed-size
chunks whose partial statistics are merged in index order; the thread
count changes scheduling only, never the result.
"""

from __future__ import annotations

import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable

__all__ = [
    "RunningStats",
    "Comparator",
    "Experiment",
    "Report",
    "CoupledReport",
    "TrialError",
    "run",
    "run_coupled",
]

_CHUNK = 256


class TrialError(RuntimeError):
    """A generator raised; carries the trial index for replay."""

    def __init__(self, experiment_id: str, trial: int, cause: BaseException):
        super().__init__(f"experiment {experiment_id!r} failed at trial {trial}: {cause}")
        self.trial = trial


@dataclass
class RunningStats:
    """Welford accumulator with exact pairwise merge."""

    count: int = 0
    mean: float = 0.0
    m2: float = 0.0

    def push(self, x: float) -> None:
        self.count += 1
        d = x - self.mean
        self.mean += d / self.count
        self.m2 += d * (x - self.mean)

    def merge(self, other: "RunningStats") -> None:
        if other.count == 0:
            return
        if self.count == 0:
            self.count, self.mean, self.m2 = other.count, other.mean, other.m2
            return
        n = self.count + other.count
        d = other.mean - self.mean
        self.mean += d * other.count / n
        self.m2 += other.m2 + d * d * self.count * other.count / n
        self.count = n

    @property
    def variance(self) -> float:
        if self.count < 2:
            return 0.0
        return self.m2 / (self.count - 1)

    @property
    def se(self) -> float:
        if self.count < 2:
            return 0.0
        return math.sqrt(self.variance / self.count)


@dataclass(frozen=True)
class Comparator:
    """Pass criterion applied to (estimate, se).

    kinds: 'match_4se'  |estimate - target| <= 4 se
           'upper_4se'  estimate - 4 se <= target
           'at_most'    estimate <= target (exact)
    """

    kind: str
    target: float

    def evaluate(self, estimate: float, se: float) -> bool:
        if self.kind == "match_4se":
            return abs(estimate - self.target) <= 4.0 * se
        if self.kind == "upper_4se":
            return estimate - 4.0 * se <= self.target
        if self.kind == "at_most":
            return estimate <= self.target
        raise ValueError(f"unknown comparator kind {self.kind!r}")

    def describe(self) -> str:
        op = {"match_4se": "~", "upper_4se": "<~", "at_most": "<="}[self.kind]
        return f"estimate {op} {self.target!r}"


# A generator maps (seed, trial) to a value, optionally flagged censored.
Generator = Callable[[int, int], "float | tuple[float, bool]"]


@dataclass(frozen=True)
class Experiment:
    experiment_id: str
    generator: Generator
    trials: int
    seed: int
    statistic: str = "mean"  # 'mean' or 'proportion'
    comparator: Comparator | None = None
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.trials < 1:
            raise ValueError("experiment needs at least one trial")
        if self.statistic not in ("mean", "proportion"):
            raise ValueError(f"unknown statistic {self.statistic!r}")


@dataclass(frozen=True)
class Report:
    experiment_id: str
    statistic: str
    trials: int
    estimate: float
    se: float
    ci95: tuple[float, float]
    censored: int
    comparator: str | None
    target: float | None
    passed: bool | None
    wall_time_s: float
    params: dict = field(default_factory=dict)

    def to_json_dict(self, include_wall: bool = True) -> dict:
        out = {
            "experiment_id": self.experiment_id,
            "statistic": self.statistic,
            "trials": self.trials,
            "estimate": self.estimate,
            "se": self.se,
            "ci95": list(self.ci95),
            "censored": self.censored,
            "comparator": self.comparator,
            "target": self.target,
            "passed": self.passed,
            "params": self.params,
        }
        if include_wall:
            out["wall_time_s"] = self.wall_time_s
        return out


def _eval_chunk(exp: Experiment, start: int, stop: int) -> tuple[RunningStats, int]:
    stats = RunningStats()
    censored = 0
    for t in range(start, stop):
        try:
            out = exp.generator(exp.seed, t)
        except Exception as exc:
            raise TrialError(exp.experiment_id, t, exc) from exc
        if isinstance(out, tuple):
            value, cens = out
            censored += bool(cens)
        else:
            value = out
        stats.push(float(value))
    return stats, censored


def run(exp: Experiment, threads: int = 1) -> Report:
    """Evaluate all trials and report the estimate.

    Chunk size is fixed, and chunk statistics are merged in index order, so
    the report is identical for every thread count.
    """
    t0 = time.perf_counter()
    spans = [(s, min(s + _CHUNK, exp.trials)) for s in range(0, exp.trials, _CHUNK)]
    if threads > 1 and len(spans) > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            parts = list(pool.map(lambda sp: _eval_chunk(exp, *sp), spans))
    else:
        parts = [_eval_chunk(exp, *sp) for sp in spans]
    stats = RunningStats()
    censored = 0
    for part, cens in parts:
        stats.merge(part)
        censored += cens
    if exp.statistic == "proportion":
        p = stats.mean
        se = math.sqrt(max(p * (1.0 - p), 0.0) / stats.count)
    else:
        se = stats.se
    est = stats.mean
    passed = None
    desc = None
    target = None
    if exp.comparator is not None:
        passed = exp.comparator.evaluate(est, se)
        desc = exp.comparator.describe()
        target = exp.comparator.target
    return Report(
        experiment_id=exp.experiment_id,
        statistic=exp.statistic,
        trials=exp.trials,
        estimate=est,
        se=se,
        ci95=(est - 1.96 * se, est + 1.96 * se),
        censored=censored,
        comparator=desc,
        target=target,
        passed=passed,
        wall_time_s=time.perf_counter() - t0,
        params=dict(exp.params),
    )


@dataclass(frozen=True)
class CoupledReport:
    experiment_id: str
    relation: str
    trials: int
    violations: int
    first_violation: int | None
    wall_time_s: float
    params: dict = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return self.violations == 0

    def to_json_dict(self, include_wall: bool = True) -> dict:
        out = {
            "experiment_id": self.experiment_id,
            "relation": self.relation,
            "trials": self.trials,
            "violations": self.violations,
            "first_violation": self.first_violation,
            "passed": self.passed,
            "params": self.params,
        }
        if include_wall:
            out["wall_time_s"] = self.wall_time_s
        return out


_RELATIONS = {
    "implies": lambda a, b: (not a) or b,
    "le": lambda a, b: a <= b,
    "ge": lambda a, b: a >= b,
}


def run_coupled(
    experiment_id: str,
    gen_a: Callable[[int, int], float],
    gen_b: Callable[[int, int], float],
    trials: int,
    seed: int,
    relation: str = "implies",
    params: dict | None = None,
) -> CoupledReport:
    """Drive two generators from the same (seed, trial) pairs and count
    violations of the stated pointwise relation between their values."""
    if relation not in _RELATIONS:
        raise ValueError(f"unknown relation {relation!r}")
    check = _RELATIONS[relation]
    t0 = time.perf_counter()
    violations = 0
    first = None
    for t in range(trials):
        a = gen_a(seed, t)
        b = gen_b(seed, t)
        if not check(a, b):
            violations += 1
            if first is None:
                first = t
    return CoupledReport(
        experiment_id=experiment_id,
        relation=relation,
        trials=trials,
        violations=violations,
        first_violation=first,
        wall_time_s=time.perf_counter() - t0,
        params=dict(params or {}),
    )
