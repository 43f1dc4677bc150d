import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from fracperc.contour import (
    Contour,
    blocking_certificate,
    concatenation_check,
    leftmost_gap_count,
    lowest_contour_height,
    min_contour_by_enumeration,
    min_height_sampled,
    reflect_contour,
    reflect_square,
    reflect_vacancies,
    reflected_lowest_contour,
    sample_coupled_gap,
    sample_coupled_gaps,
    sampled_gap_count,
    validate_contour,
)
from fracperc.crossing import has_crossing
from fracperc.lattice import (
    GridConfig,
    Square,
    VacancySet,
    sample_retained_bits,
    sample_vacancies,
)
from fracperc.schedule import Schedule


def test_single_floor_square_has_height_zero():
    # One level-1 square (side 2) spans the whole width-2 strip at the floor.
    cfg = GridConfig(n=2, r=2, width=2, height=4, k_min=1, k_max=2)
    vac = VacancySet.from_squares(cfg, [Square(1, 1, 1)])
    res = lowest_contour_height(vac, (0, 2))
    assert not res.censored
    assert res.height == 0
    assert res.contour.squares == (Square(1, 1, 1),)


def test_empty_vacancies_are_censored():
    cfg = GridConfig(n=2, r=2, width=4, height=4, k_min=1, k_max=2)
    vac = VacancySet.from_squares(cfg, [])
    res = lowest_contour_height(vac, (0, 4))
    assert res.censored
    assert res.height is None and res.contour is None


def test_mixed_level_hand_case():
    # Unit squares cover the floor up to x=2; the only way across (2, 4) is
    # a level-1 square with bottom 2, so every spanning contour must climb.
    cfg = GridConfig(n=2, r=2, width=8, height=8, k_min=1, k_max=2)
    vac = VacancySet.from_squares(
        cfg,
        [
            Square(2, 1, 1),
            Square(2, 2, 1),
            Square(1, 2, 2),
            Square(1, 3, 1),
            Square(1, 4, 1),
        ],
    )
    res = lowest_contour_height(vac, (0, 8))
    assert res.height == 2
    assert {sq.level for sq in res.contour.squares} == {1, 2}
    validate_contour(cfg, vac, res.contour)


def test_span_validation():
    cfg = GridConfig(n=2, r=2, width=4, height=4, k_min=1, k_max=2)
    vac = VacancySet.from_squares(cfg, [Square(1, 1, 1)])
    with pytest.raises(ValueError):
        lowest_contour_height(vac, (0, 5))
    with pytest.raises(ValueError):
        lowest_contour_height(vac, (3, 3))
    with pytest.raises(ValueError):
        lowest_contour_height(vac, (0, 4), level_range=(3, 5))


def random_config(seed):
    rng = np.random.default_rng(seed)
    n = 2
    r = int(rng.integers(2, 4))
    side0 = n ** (r - 1)
    width = side0 * int(rng.integers(1, max(2, 8 // side0) + 1))
    height = side0 * int(rng.integers(1, max(2, 8 // side0) + 1))
    cfg = GridConfig(n=n, r=r, width=width, height=height, k_min=1, k_max=r)
    p = float(rng.uniform(0.3, 0.8))
    vac = sample_vacancies(cfg, Schedule.constant(p), int(rng.integers(10 ** 6)))
    cap = int(rng.integers(1, height + 1)) if rng.random() < 0.5 else None
    v = int(rng.integers(0, 3)) if rng.random() < 0.5 else 0
    return cfg, vac, cap, v


@given(st.integers(min_value=0, max_value=10 ** 9))
@settings(max_examples=150, deadline=None)
def test_threshold_search_equals_enumeration(seed):
    cfg, vac, cap, v = random_config(seed)
    span = (0, cfg.width)
    res = lowest_contour_height(vac, span, height_cap=cap, first_top_min=v)
    brute = min_contour_by_enumeration(vac, span, height_cap=cap, first_top_min=v)
    if res.censored:
        assert brute is None
    else:
        assert res.height == brute
        validate_contour(cfg, vac, res.contour, first_top_min=v)


@given(st.integers(min_value=0, max_value=10 ** 9))
@settings(max_examples=60, deadline=None)
def test_raising_cap_never_raises_height(seed):
    cfg, vac, _, _ = random_config(seed)
    span = (0, cfg.width)
    small = lowest_contour_height(vac, span, height_cap=2)
    big = lowest_contour_height(vac, span, height_cap=cfg.height)
    if not small.censored:
        assert not big.censored
        assert big.height == small.height
    elif not big.censored:
        assert big.height > 2


def test_first_top_min_above_everything_censors():
    cfg = GridConfig(n=2, r=2, width=4, height=4, k_min=1, k_max=2)
    vac = VacancySet.from_squares(cfg, [Square(2, c, 1) for c in range(1, 5)])
    assert not lowest_contour_height(vac, (0, 4), first_top_min=1).censored
    assert lowest_contour_height(vac, (0, 4), first_top_min=2).censored


def test_validate_contour_rejects_tampering():
    cfg = GridConfig(n=2, r=2, width=4, height=4, k_min=1, k_max=2)
    squares = [Square(2, c, 1) for c in range(1, 5)]
    vac = VacancySet.from_squares(cfg, squares)
    good = lowest_contour_height(vac, (0, 4)).contour
    validate_contour(cfg, vac, good)

    gap = Contour(squares=good.squares[:-1], span=good.span, height=good.height)
    with pytest.raises(ValueError):
        validate_contour(cfg, vac, gap)
    not_vacant = Contour(
        squares=good.squares[:-1] + (Square(2, 4, 2),),
        span=good.span,
        height=good.height,
    )
    with pytest.raises(ValueError):
        validate_contour(cfg, vac, not_vacant)
    wrong_height = Contour(squares=good.squares, span=good.span, height=3)
    with pytest.raises(ValueError):
        validate_contour(cfg, vac, wrong_height)
    with pytest.raises(ValueError):
        validate_contour(cfg, vac, good, first_top_min=5)


def test_validate_contour_checks_vertical_contact():
    cfg = GridConfig(n=2, r=3, width=8, height=8, k_min=1, k_max=3)
    vac = VacancySet.from_squares(
        cfg, [Square(2, 1, 4), Square(2, 2, 1), Square(2, 3, 1), Square(2, 4, 1)]
    )
    # Second square's top (4) is below the first one's bottom (6).
    broken = Contour(
        squares=(Square(2, 1, 4), Square(2, 2, 1), Square(2, 3, 1), Square(2, 4, 1)),
        span=(0, 8),
        height=6,
    )
    with pytest.raises(ValueError):
        validate_contour(cfg, vac, broken)


# -- reflection ----------------------------------------------------------------


def test_reflect_square_involution():
    cfg = GridConfig(n=2, r=3, width=8, height=8, k_min=1, k_max=3)
    band = (0, 8)
    for sq in (Square(1, 1, 1), Square(2, 3, 2), Square(3, 8, 5)):
        assert reflect_square(cfg, band, reflect_square(cfg, band, sq)) == sq
    with pytest.raises(ValueError):
        reflect_square(cfg, (0, 6), Square(1, 1, 1))  # band not level-aligned


@given(st.integers(min_value=0, max_value=10 ** 9))
@settings(max_examples=40, deadline=None)
def test_reflect_vacancies_involution(seed):
    cfg = GridConfig(n=2, r=3, width=8, height=8, k_min=1, k_max=3)
    vac = sample_vacancies(cfg, Schedule.constant(0.5), seed)
    band = (0, 8)
    assert reflect_vacancies(reflect_vacancies(vac, band), band) == vac


def test_symmetric_set_has_equal_reflected_height():
    cfg = GridConfig(n=2, r=2, width=4, height=4, k_min=2, k_max=2)
    squares = [Square(2, 1, 2), Square(2, 2, 2), Square(2, 3, 3), Square(2, 4, 3)]
    mirrored = [Square(2, sq.col, 5 - sq.row) for sq in squares]
    vac = VacancySet.from_squares(cfg, squares + mirrored)
    plain = lowest_contour_height(vac, (0, 4))
    refl = reflected_lowest_contour(vac, (0, 4), band=(0, 4))
    assert plain.height == refl.height


@given(st.integers(min_value=0, max_value=10 ** 9))
@settings(max_examples=60, deadline=None)
def test_reflected_height_equals_enumeration_on_mirror(seed):
    cfg = GridConfig(n=2, r=3, width=8, height=8, k_min=1, k_max=3)
    vac = sample_vacancies(cfg, Schedule.constant(0.55), seed)
    band = (0, 8)
    res = reflected_lowest_contour(vac, (0, 8), band)
    brute = min_contour_by_enumeration(reflect_vacancies(vac, band), (0, 8))
    assert (res.height if not res.censored else None) == brute
    if res.contour is not None:
        # Mapping the witness back is a level-preserving bijection.
        back = reflect_contour(cfg, band, res.contour)
        assert all(b.level == w.level for b, w in zip(back, res.contour.squares))


# -- gap coupling ---------------------------------------------------------------


def test_coupled_gap_floor_identity():
    sched = Schedule.constant(0.5)
    for t in range(200):
        g = sample_coupled_gap(sched, 1, seed=3, trial=t)
        assert g.gap == math.floor(g.y)
        assert g.gap <= g.y
        assert g.theta == pytest.approx(math.log(2.0))
    with pytest.raises(ValueError):
        sample_coupled_gap(Schedule.constant(1.0), 1, seed=3)


def test_coupled_gap_batch_matches_scalar():
    sched = Schedule.harmonic()
    ys, gaps = sample_coupled_gaps(sched, 2, seed=11, trials=50)
    for t in range(50):
        one = sample_coupled_gap(sched, 2, seed=11, trial=t)
        assert one.y == ys[t]
        assert one.gap == gaps[t]


def test_gap_tail_matches_geometric_dkw():
    # P[G >= l] = p**l; with 10^5 draws the DKW band at alpha = 1e-6 is
    # sqrt(log(2/alpha) / (2n)) ~ 0.0085.
    p = 0.5
    trials = 100000
    _, gaps = sample_coupled_gaps(Schedule.constant(p), 1, seed=17, trials=trials)
    eps = math.sqrt(math.log(2 / 1e-6) / (2 * trials))
    for ell in range(0, 15):
        emp = float((gaps >= ell).mean())
        assert abs(emp - p ** ell) <= eps


def test_leftmost_gap_count_hand_cases():
    cfg = GridConfig(n=2, r=3, width=2, height=8, k_min=2, k_max=2)
    vac = VacancySet.from_squares(cfg, [Square(2, 1, 3)])
    assert leftmost_gap_count(vac, 2, v=0) == 2
    # v on a square boundary starts counting at the square above it.
    assert leftmost_gap_count(vac, 2, v=2) == 1
    assert leftmost_gap_count(vac, 2, v=4) == 0
    # v strictly inside a square rounds up to that square.
    assert leftmost_gap_count(vac, 2, v=1) == 2
    empty = VacancySet.from_squares(cfg, [])
    assert leftmost_gap_count(empty, 2) is None


def test_sampled_gap_matches_leftmost_count():
    sched = Schedule.constant(0.5)
    n, r, level = 2, 4, 2
    for t in range(40):
        g = sampled_gap_count(sched, 5, t, n=n, r=r, level=level)
        if g is None:
            continue
        bands = 4
        while True:
            cfg = GridConfig.strip(n, r, level, bands=bands, levels=(level, level))
            direct = leftmost_gap_count(sample_vacancies(cfg, sched, 5, t), level)
            if direct is not None:
                assert direct == g
                break
            bands *= 2


def test_height_dominated_by_gap():
    # A single-column gap of G retained level-k squares caps the minimal
    # contour height at G level-k sides above the base.
    sched = Schedule.harmonic()
    n, r, k = 2, 5, 2
    s = n ** (r - k)
    for t in range(100):
        for v in (0, 3):
            res = min_height_sampled(
                sched, 23, t, n=n, r=r, levels=(k, r), span=(0, s), v=v
            )
            g = sampled_gap_count(sched, 23, t, n=n, r=r, level=k, v=v)
            if res.censored or g is None:
                continue
            assert res.height_above <= s * g


def test_concatenation_bound_holds():
    sched = Schedule.harmonic()
    checked = 0
    for t in range(60):
        out = concatenation_check(sched, 31, t, n=2, r=5, k=2)
        if out is None:
            continue
        checked += 1
        assert out["ok"]
        assert out["full"] <= out["bound"]
        assert out["bound"] == sum(max(p, 0) for p in out["parts"])
    assert checked >= 40


def test_min_height_sampled_visibility():
    sched = Schedule.constant(0.5)
    for t in range(50):
        res = min_height_sampled(sched, 41, t, n=2, r=6, levels=(2, 6), span=(0, 16))
        if not res.censored:
            assert res.height <= res.cap
        else:
            assert res.cap is not None


def test_hard_cap_env_override(monkeypatch):
    monkeypatch.setenv("FRACPERC_HARD_CAP", "4")
    sched = Schedule.constant(0.999)
    censored = 0
    for t in range(40):
        res = min_height_sampled(sched, 2, t, n=2, r=4, levels=(1, 4), span=(0, 8))
        if res.censored:
            censored += 1
            # One growth round only: the cap equals 3 coarse sides.
            assert res.cap == 3 * 8
    assert censored > 30


# -- blocking certificates -------------------------------------------------------


def full_level_vacancies(cfg, k):
    ncols, nrows = cfg.level_shape(k)
    return VacancySet.from_squares(
        cfg, [Square(k, c, r) for c in range(1, ncols + 1) for r in range(1, nrows + 1)]
    )


def test_blocking_certificate_on_full_layer():
    cfg = GridConfig.unit_square(2, 4, levels=(2, 4))
    vac = full_level_vacancies(cfg, 2)
    s = cfg.side(2)
    for i in range(1, 4):
        cert = blocking_certificate(vac, 2, i)
        assert cert.found
        assert cert.start_rows == ((i - 1) * s + 1, i * s)
        assert cert.column == 1
        validate_contour(cfg, vac, cert.contour)
        if i >= 2:
            assert cert.reflected is not None


def test_blocking_certificate_not_found_without_vacancies():
    cfg = GridConfig.unit_square(2, 4, levels=(2, 4))
    vac = VacancySet.from_squares(cfg, [])
    cert = blocking_certificate(vac, 2, 2)
    assert not cert.found
    assert cert.contour is None and cert.column is None


def test_blocking_certificate_validation():
    cfg = GridConfig.unit_square(2, 4, levels=(2, 4))
    vac = VacancySet.from_squares(cfg, [])
    with pytest.raises(ValueError):
        blocking_certificate(vac, 2, 0)
    with pytest.raises(ValueError):
        blocking_certificate(vac, 2, 4)
    with pytest.raises(ValueError):
        blocking_certificate(vac, 1, 1)  # level below the config range
    rect = GridConfig(n=2, r=3, width=8, height=16, k_min=1, k_max=3)
    with pytest.raises(ValueError):
        blocking_certificate(sample_vacancies(rect, Schedule.constant(0.5), 1), 1, 1)


def test_found_certificate_blocks_its_band():
    sched = Schedule.constant(0.55)
    cfg = GridConfig.unit_square(2, 5)
    found = 0
    for t in range(60):
        vac = sample_vacancies(cfg, sched, 13, t)
        for i in (1, 2):
            cert = blocking_certificate(vac, 2, i)
            if not cert.found:
                continue
            found += 1
            bits = sample_retained_bits(cfg, sched, 13, t)
            assert not has_crossing(bits, start_rows=cert.start_rows)
    assert found >= 10
