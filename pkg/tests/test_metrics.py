import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from collision_mmab import BanditConfig, simulate
from collision_mmab.env import Trace
from collision_mmab.metrics import (
    RegretLedger, agent_deficits, boundary_gaps, comm_rounds_bound, decompose, dynamic_gaps,
    dynamic_step_regret, group_regret, lower_bound_constant, message_bits_bound, step_regret,
)
from collision_mmab.phases import Phase


def make_trace(arms, collisions=None, phases=None, active=None):
    arms = np.asarray(arms, dtype=np.int16)
    shape = arms.shape
    return Trace(
        arms,
        np.zeros(shape, bool) if collisions is None else np.asarray(collisions, bool),
        np.zeros(shape, np.uint8),
        np.full(shape, Phase.EXPLORE, np.uint8) if phases is None else np.asarray(phases, np.uint8),
        np.ones(shape, bool) if active is None else np.asarray(active, bool),
    )


def test_step_regret_by_hand():
    means = (0.9, 0.5, 0.2)
    t = make_trace([[0, 1], [2, 1], [1, 1]], collisions=[[0, 0], [0, 0], [1, 1]])
    assert step_regret(t, means).tolist() == pytest.approx([0.0, 0.7, 1.4])


def test_lower_bound_constant_examples():
    assert lower_bound_constant((0.9, 0.5), [1]) == pytest.approx(2.5)
    means = (0.9, 0.8, 0.7, 0.6, 0.5)
    gaps = dynamic_gaps(means, [1, 2])
    assert gaps[0] == np.inf
    assert gaps[1] == pytest.approx(0.1)
    assert gaps[2:].tolist() == pytest.approx([0.1, 0.2, 0.3])
    assert lower_bound_constant(means, [1, 2]) == pytest.approx(10 + 10 + 5 + 10 / 3)


def test_boundary_gaps_and_bounds():
    means = (0.9, 0.85, 0.8, 0.5)
    assert boundary_gaps(means, 2).tolist() == pytest.approx([0.1, 0.05, 0.05, 0.35])
    assert message_bits_bound(5, 1.5) == pytest.approx(7 + np.log2(2.5 + np.sqrt(5 * np.log(2) / 2)))
    assert comm_rounds_bound(means, 2, 2.0) == pytest.approx(sum(np.log2(16 / g) for g in (0.1, 0.05, 0.05, 0.35)))


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 2**31 - 1))
def test_decomposition_and_deficits_on_random_traces(seed):
    rng = np.random.default_rng(seed)
    T, M, K = 50, 3, 5
    arms = rng.integers(-1, K, size=(T, M))
    coll = rng.random((T, M)) < 0.2
    phases = rng.integers(0, 6, size=(T, M))
    t = make_trace(arms, coll, phases, arms >= 0)
    means = tuple(rng.random(K))
    total = group_regret(t, means)
    assert sum(decompose(t, means)) == pytest.approx(total, abs=1e-9)
    assert agent_deficits(t, means).sum() == pytest.approx(total, abs=1e-9)


def test_dynamic_regret_counts_only_active_agents():
    means = (0.9, 0.8, 0.1)
    t = make_trace([[0, -1], [1, 0]], active=[[1, 0], [1, 1]])
    assert dynamic_step_regret(t, means).tolist() == pytest.approx([0.0, 0.0])


def test_ledger_on_a_run():
    r = simulate(BanditConfig(6, 3, 20_000, (0.9, 0.8, 0.7, 0.3, 0.2, 0.1), 0), beta=1.5)
    led = RegretLedger.from_trace(r.trace, r.config.means, r.messages)
    assert led.init + led.comm + led.explo == pytest.approx(led.group, rel=1e-12)
    assert led.collision_free and led.first_messages_exact
    assert led.comm_rounds == r.agents[0].comm_rounds


def _threshold_oracle(means, levels):
    """Enumerate critical arms: each level I makes the I-th best arm a threshold."""
    order = sorted(range(len(means)), key=lambda k: -means[k])
    out = {}
    for r, k in enumerate(order, start=1):
        crit = [lvl for lvl in levels if lvl < r]
        out[k] = means[order[max(crit) - 1]] - means[k] if crit else float("inf")
    return out


def test_lower_bound_constant_four_arms():
    means = (0.9, 0.8, 0.7, 0.6)
    assert lower_bound_constant(means, [1, 2]) == pytest.approx(25.0)
    oracle = _threshold_oracle(means, [1, 2])
    assert dynamic_gaps(means, [1, 2]).tolist() == pytest.approx([oracle[k] for k in range(4)])


def test_synchronous_schedule_reduces_to_single_threshold():
    means = (0.9, 0.8, 0.7, 0.6, 0.3)
    M = 2
    expected = sum(1 / (means[M - 1] - m) for m in means[M:])
    assert lower_bound_constant(means, [M]) == pytest.approx(expected)
