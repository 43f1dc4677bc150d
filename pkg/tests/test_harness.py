import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from fracperc.harness import (
    Comparator,
    Experiment,
    RunningStats,
    TrialError,
    run,
    run_coupled,
)
from fracperc.rng import derive_key, indexed_value

floats = st.floats(min_value=-1e6, max_value=1e6, allow_nan=False, width=64)


@given(st.lists(floats, min_size=2, max_size=200))
@settings(max_examples=100, deadline=None)
def test_running_stats_matches_numpy(xs):
    stats = RunningStats()
    for x in xs:
        stats.push(x)
    arr = np.array(xs)
    assert stats.count == len(xs)
    assert stats.mean == pytest.approx(float(arr.mean()), rel=1e-9, abs=1e-9)
    assert stats.variance == pytest.approx(float(arr.var(ddof=1)), rel=1e-9, abs=1e-9)
    assert stats.se == pytest.approx(math.sqrt(stats.variance / stats.count))


@given(st.lists(floats, min_size=0, max_size=80), st.lists(floats, min_size=0, max_size=80))
@settings(max_examples=100, deadline=None)
def test_merge_equals_sequential(xs, ys):
    left, right, seq = RunningStats(), RunningStats(), RunningStats()
    for x in xs:
        left.push(x)
        seq.push(x)
    for y in ys:
        right.push(y)
        seq.push(y)
    left.merge(right)
    assert left.count == seq.count
    assert left.mean == pytest.approx(seq.mean, rel=1e-9, abs=1e-12)
    assert left.m2 == pytest.approx(seq.m2, rel=1e-9, abs=1e-9)


def test_small_count_edge_cases():
    s = RunningStats()
    assert s.variance == 0.0 and s.se == 0.0
    s.push(3.0)
    assert s.mean == 3.0 and s.variance == 0.0 and s.se == 0.0


def _u(seed, trial):
    # Cheap deterministic value in [0, 1) keyed by (seed, trial).
    return indexed_value(derive_key(seed, 99), trial) / 2.0 ** 64


def test_thread_count_does_not_change_the_report():
    exp = Experiment(
        experiment_id="threading",
        generator=_u,
        trials=600,
        seed=11,
        comparator=Comparator("match_4se", 0.5),
    )
    reports = [run(exp, threads=t).to_json_dict(include_wall=False) for t in (1, 2, 8)]
    assert reports[0] == reports[1] == reports[2]
    assert reports[0]["passed"] is True


def test_censored_flags_are_counted():
    def gen(seed, trial):
        return (float(trial), trial % 7 == 0)

    rep = run(Experiment("cens", gen, trials=300, seed=0))
    assert rep.censored == sum(1 for t in range(300) if t % 7 == 0)
    assert rep.estimate == pytest.approx(np.mean(np.arange(300.0)))


def test_proportion_uses_binomial_se():
    def gen(seed, trial):
        return 1.0 if trial % 4 == 0 else 0.0

    rep = run(Experiment("prop", gen, trials=400, seed=0, statistic="proportion"))
    p = rep.estimate
    assert p == pytest.approx(0.25, abs=1e-12)
    assert rep.se == pytest.approx(math.sqrt(p * (1 - p) / 400))
    assert rep.ci95 == pytest.approx((p - 1.96 * rep.se, p + 1.96 * rep.se))


def test_report_without_comparator_has_no_verdict():
    rep = run(Experiment("plain", _u, trials=10, seed=1))
    assert rep.passed is None and rep.comparator is None and rep.target is None


def test_comparator_truth_table():
    assert Comparator("match_4se", 1.0).evaluate(1.2, 0.05)
    assert not Comparator("match_4se", 1.0).evaluate(1.3, 0.05)
    assert Comparator("upper_4se", 1.0).evaluate(1.1, 0.05)
    assert not Comparator("upper_4se", 1.0).evaluate(1.3, 0.05)
    assert Comparator("at_most", 1.0).evaluate(1.0, 0.5)
    assert not Comparator("at_most", 1.0).evaluate(1.0 + 1e-12, 0.5)
    with pytest.raises(ValueError):
        Comparator("between", 1.0).evaluate(1.0, 0.0)
    assert "<=" in Comparator("at_most", 2.0).describe()


def test_trial_error_carries_the_trial_index():
    def gen(seed, trial):
        if trial == 17:
            raise ZeroDivisionError("boom")
        return 0.0

    with pytest.raises(TrialError) as err:
        run(Experiment("fragile", gen, trials=100, seed=0))
    assert err.value.trial == 17
    assert "fragile" in str(err.value)
    assert isinstance(err.value.__cause__, ZeroDivisionError)


def test_experiment_validation():
    with pytest.raises(ValueError):
        Experiment("bad", _u, trials=0, seed=0)
    with pytest.raises(ValueError):
        Experiment("bad", _u, trials=10, seed=0, statistic="median")


def test_rerun_is_bit_identical():
    exp = Experiment("repeat", _u, trials=500, seed=42, params={"note": "x"})
    a = run(exp).to_json_dict(include_wall=False)
    b = run(exp).to_json_dict(include_wall=False)
    assert a == b
    assert a["params"] == {"note": "x"}


def test_coupled_counts_violations():
    rep = run_coupled(
        "parity",
        gen_a=lambda s, t: float(t % 2),
        gen_b=lambda s, t: 0.0,
        trials=10,
        seed=0,
        relation="implies",
    )
    assert rep.violations == 5
    assert rep.first_violation == 1
    assert not rep.passed


def test_coupled_identical_generators_pass():
    rep = run_coupled("same", _u, _u, trials=200, seed=3, relation="le")
    assert rep.passed and rep.violations == 0 and rep.first_violation is None
    assert run_coupled("same", _u, _u, trials=200, seed=3, relation="ge").passed


def test_coupled_unknown_relation():
    with pytest.raises(ValueError):
        run_coupled("bad", _u, _u, trials=1, seed=0, relation="xor")
