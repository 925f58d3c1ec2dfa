import math

import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy import stats

from app.errors import UndefinedResultError
from app.experiments.stats_service import cohens_d, compare, relative_change, welch_t

PAIRS = [
    ([12.1, 14.3, 11.8, 15.2, 13.0], [10.2, 9.8, 11.5, 10.9, 12.2, 9.1]),
    ([200, 215, 190, 240], [180, 170, 210, 190]),
    ([0.5, 0.7, 0.2, 0.9, 0.4, 0.6, 0.3], [0.8, 1.1, 0.9, 1.4]),
    ([3.0, 3.0, 3.1], [2.0, 4.0, 6.0, 8.0]),
    ([55, 61, 58, 49, 70, 66, 52, 59], [48, 50, 61, 45, 52, 47, 55, 49]),
]


def hand_welch(a, b):
    a, b = np.asarray(a, float), np.asarray(b, float)
    va, vb = a.var(ddof=1) / len(a), b.var(ddof=1) / len(b)
    t = (a.mean() - b.mean()) / math.sqrt(va + vb)
    df = (va + vb) ** 2 / (va**2 / (len(a) - 1) + vb**2 / (len(b) - 1))
    return t, df, 2 * stats.t.sf(abs(t), df)


def test_welch_reference_values():
    t, df, p = welch_t([1, 2, 3, 4, 5], [2, 3, 4, 5, 6])
    assert t == pytest.approx(-1.0)
    assert df == pytest.approx(8.0)
    assert p == pytest.approx(0.3466, abs=1e-4)


@pytest.mark.parametrize("a,b", PAIRS)
def test_welch_matches_hand_formula(a, b):
    expected = hand_welch(a, b)
    assert welch_t(a, b) == pytest.approx(expected, rel=1e-9)


def test_identical_samples():
    t, df, p = welch_t([4.0, 5.0, 6.0], [4.0, 5.0, 6.0])
    assert t == 0.0
    assert p == pytest.approx(1.0)


def test_constant_equal_samples_are_not_different():
    assert welch_t([2.0, 2.0, 2.0], [2.0, 2.0]) == (0.0, 3.0, 1.0)


def test_constant_unequal_samples_are_undefined():
    with pytest.raises(UndefinedResultError):
        welch_t([1.0, 1.0, 1.0], [2.0, 2.0, 2.0])


def test_far_apart_samples():
    rng = np.random.default_rng(0)
    _, _, p = welch_t(rng.normal(0, 1, 30), rng.normal(10, 1, 30))
    assert p < 1e-6


def test_too_few_observations():
    with pytest.raises(UndefinedResultError):
        welch_t([1.0], [1.0, 2.0])
    with pytest.raises(UndefinedResultError):
        cohens_d([1.0, None], [1.0, 2.0])


def test_cohens_d_reference():
    assert cohens_d([8, 10, 12], [10, 12, 14]) == pytest.approx(-1.0)
    with pytest.raises(UndefinedResultError):
        cohens_d([3.0, 3.0], [3.0, 3.0])


@given(
    a=st.lists(st.floats(min_value=-1e3, max_value=1e3), min_size=2, max_size=20),
    b=st.lists(st.floats(min_value=-1e3, max_value=1e3), min_size=2, max_size=20),
)
def test_cohens_d_is_antisymmetric(a, b):
    try:
        forward = cohens_d(a, b)
    except UndefinedResultError:
        return
    assert cohens_d(b, a) == pytest.approx(-forward, rel=1e-9, abs=1e-12)


def test_relative_change():
    assert relative_change(200.0, 150.0) == pytest.approx(-25.0)
    assert relative_change(0.0, 5.0) is None
    assert relative_change(None, 5.0) is None


def test_compare_fills_undefined_with_none():
    result = compare("M", "fast_track", "mortality_rate", [0.0, 0.0, 0.0], [0.0, 0.0, 0.0])
    assert result.p_value == pytest.approx(1.0)
    assert result.cohens_d is None
    assert result.relative_change_pct is None
    result = compare("M", "fast_track", "los", [100.0, None, 120.0], [90.0, 95.0])
    assert result.n_baseline == 2 and result.n_intervention == 2
    assert result.mean_baseline == pytest.approx(110.0)
    assert result.cohens_d > 0
