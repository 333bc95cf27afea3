import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from pairtransfer.distance import DistanceMetric, distance, dtw_batch

EUC = DistanceMetric("euclidean")
DTW = DistanceMetric("dtw")

finite = st.floats(-100, 100, allow_nan=False, allow_infinity=False)


def series(min_size=1, max_size=6):
    return st.lists(finite, min_size=min_size, max_size=max_size)


def brute_force_dtw(a, b):
    """Minimum cost over every monotone warping path, enumerated explicitly."""
    n, m = len(a), len(b)
    best = math.inf

    def walk(i, j, acc):
        nonlocal best
        acc += abs(a[i] - b[j])
        if acc >= best:
            return
        if (i, j) == (n - 1, m - 1):
            best = acc
            return
        for di, dj in ((1, 0), (0, 1), (1, 1)):
            if i + di < n and j + dj < m:
                walk(i + di, j + dj, acc)

    walk(0, 0, 0.0)
    return best


def all_path_costs(a, b):
    # independent second oracle: build paths as explicit step sequences
    n, m = len(a), len(b)
    costs = []
    steps = [(1, 0), (0, 1), (1, 1)]
    for length in range(max(n, m) - 1, n + m - 1):
        for seq in itertools.product(steps, repeat=length):
            i = j = 0
            cost = abs(a[0] - b[0])
            for di, dj in seq:
                i, j = i + di, j + dj
                if i >= n or j >= m:
                    break
                cost += abs(a[i] - b[j])
            else:
                if (i, j) == (n - 1, m - 1):
                    costs.append(cost)
    return costs


def test_euclidean_345():
    assert distance(EUC, [0, 0], [3, 4]) == 5.0


def test_dtw_repeated_sample_is_free():
    assert distance(DTW, [1, 2, 3], [1, 1, 2, 3]) == 0.0
    assert min(all_path_costs([1, 2, 3], [1, 1, 2, 3])) == 0.0


def test_dtw_hand_value():
    # the diagonal path pays |1 - 2| once; every detour pays it at least once more
    assert distance(DTW, [0, 1], [0, 2]) == 1.0


@pytest.mark.parametrize("metric", [EUC, DTW])
def test_domain_errors(metric):
    with pytest.raises(ValueError):
        distance(metric, [], [])
    with pytest.raises(ValueError):
        distance(metric, [1.0, np.nan], [1.0, 2.0])


def test_window_must_reach_corner():
    with pytest.raises(ValueError):
        dtw_batch([[1, 2, 3, 4]], [[1, 2]], window=1)
    with pytest.raises(ValueError):
        DistanceMetric("dtw", dtw_window=-1)


def test_unequal_lengths_supported():
    assert dtw_batch([[0.0, 0.0, 1.0]], [[0.0, 1.0]])[0] == 0.0


def test_batch_matches_single_calls():
    rng = np.random.default_rng(3)
    a, b = rng.normal(size=(20, 9)), rng.normal(size=(20, 9))
    batch = dtw_batch(a, b)
    single = [distance(DTW, x, y) for x, y in zip(a, b)]
    np.testing.assert_array_equal(batch, single)


@settings(max_examples=150, deadline=None)
@given(series(), series())
def test_dtw_matches_path_enumeration(a, b):
    assert distance(DTW, a, b) == pytest.approx(brute_force_dtw(a, b), rel=1e-12, abs=1e-12)


@settings(max_examples=40, deadline=None)
@given(series(max_size=4), series(max_size=4))
def test_path_oracles_agree(a, b):
    assert min(all_path_costs(a, b)) == pytest.approx(brute_force_dtw(a, b), rel=1e-12, abs=1e-12)


@settings(max_examples=100, deadline=None)
@given(st.integers(1, 8).flatmap(lambda T: st.tuples(series(T, T), series(T, T))))
def test_metric_properties(pair):
    a, b = pair
    for metric in (EUC, DTW):
        d = distance(metric, a, b)
        assert d >= 0
        assert d == distance(metric, b, a)
        assert distance(metric, a, a) == 0.0
    # the diagonal path is always admissible
    assert distance(DTW, a, b) <= sum(abs(x - y) for x, y in zip(a, b)) + 1e-9


@settings(max_examples=60, deadline=None)
@given(st.integers(1, 8).flatmap(lambda T: st.tuples(series(T, T), series(T, T))))
def test_wide_band_equals_unconstrained(pair):
    a, b = pair
    T = len(a)
    assert distance(DistanceMetric("dtw", T - 1), a, b) == distance(DTW, a, b)


def test_zero_band_is_l1():
    a, b = [0.0, 3.0, 1.0], [1.0, 1.0, 1.0]
    assert distance(DistanceMetric("dtw", 0), a, b) == 3.0
