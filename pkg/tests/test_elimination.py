import math

import pytest
from hypothesis import given, settings, strategies as st

from collision_mmab.agents.elimination import (
    accept_reject_scan, ecr_trigger, error_rate, pooled_estimate, radius, reject_scan, sort_check,
)
from collision_mmab.errors import InternalInconsistency, NotYetSampled


def brute_scan(lcb, ucb, n_free):
    n = len(lcb)
    acc, rej = [], []
    for a in range(n):
        beats = sum(1 for b in range(n) if b != a and lcb[a] >= ucb[b])
        beaten = sum(1 for b in range(n) if b != a and lcb[b] >= ucb[a])
        if beats >= n - n_free:
            acc.append(a)
        elif beaten >= n_free:
            rej.append(a)
    return acc, rej


intervals = st.lists(st.tuples(st.integers(0, 20), st.integers(0, 6)), min_size=1, max_size=9).map(
    lambda xs: ([c / 20 - w / 40 for c, w in xs], [c / 20 + w / 40 for c, w in xs]))


@settings(max_examples=400)
@given(intervals, st.integers(1, 9))
def test_scan_matches_brute_force(iv, n_free):
    lcb, ucb = iv
    n_free = min(n_free, len(lcb))
    try:
        got = accept_reject_scan(lcb, ucb, n_free)
    except InternalInconsistency:
        acc, _ = brute_scan(lcb, ucb, n_free)
        both = [a for a in acc if sum(1 for b in range(len(lcb)) if b != a and lcb[b] >= ucb[a]) >= n_free]
        assert both
        return
    assert got == brute_scan(lcb, ucb, n_free)


@settings(max_examples=300)
@given(intervals, st.integers(1, 5))
def test_reject_scan_matches_brute_force(iv, M):
    lcb, ucb = iv
    expected = [a for a in range(len(lcb))
                if sum(1 for b in range(len(lcb)) if b != a and lcb[b] >= ucb[a]) >= M]
    assert reject_scan(lcb, ucb, M) == expected


@settings(max_examples=300)
@given(st.lists(st.floats(0, 1), min_size=2, max_size=8, unique=True), st.floats(0.001, 0.2), st.integers(1, 3))
def test_sort_check_matches_definition(means, rad, M):
    M = min(M, len(means) - 1)
    lcb = [m - rad for m in means]
    ucb = [m + rad for m in means]
    done, top = sort_check(means, lcb, ucb, M)
    order = sorted(range(len(means)), key=lambda a: -means[a])
    assert top == order[:M]
    expected = all(means[order[i]] - means[order[i + 1]] > 2 * rad for i in range(M))
    assert done == expected


def test_radius_and_rate():
    assert radius(100, 4, 10) == pytest.approx(2 * 4 * math.sqrt(10 / 200))
    with pytest.raises(NotYetSampled):
        radius(0, 4, 10)
    assert error_rate(50, 10) == pytest.approx(math.sqrt(0.1))


def test_first_trigger_for_reference_horizon():
    log_inv_delta = 2 * math.log(50_000)
    first = next(n for n in range(1, 10_000) if ecr_trigger(n, 1.0, 4.0, log_inv_delta))
    assert first == math.ceil(8 * log_inv_delta) == 174


def test_pooled_estimate():
    assert pooled_estimate(30, 8, 3, 60, 12, 7) == pytest.approx(35 / 65)
    with pytest.raises(NotYetSampled):
        pooled_estimate(0, 0, 0, 0, 0, 0)
