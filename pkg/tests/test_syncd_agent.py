import numpy as np
import pytest

from collision_mmab import BanditConfig, BanditEnv, simulate
from collision_mmab.agents import SynCDAgent
from collision_mmab.driver import drive
from collision_mmab.metrics import collision_free_after_init
from collision_mmab.runner import agent_rng


def run(config, beta, speculate):
    env = BanditEnv(config)
    agents = [SynCDAgent(config.K, config.horizon, beta, None, agent_rng(config.seed, m), speculate=speculate)
              for m in range(config.M)]
    drive(env, agents)
    return env.trace, agents


EASY = BanditConfig(6, 3, 40_000, (0.9, 0.8, 0.7, 0.3, 0.2, 0.1), 0)


@pytest.mark.parametrize("seed", [0, 1])
def test_speculation_does_not_change_the_trace(seed):
    cfg = BanditConfig(6, 3, 30_000, (0.9, 0.85, 0.8, 0.7, 0.65, 0.6), seed)
    fast, fa = run(cfg, 2.0, True)
    slow, sa = run(cfg, 2.0, False)
    for name in ("arms", "collisions", "rewards", "phases"):
        assert np.array_equal(getattr(fast, name), getattr(slow, name)), name
    assert [a.accepted for a in fa] == [a.accepted for a in sa]


@pytest.mark.parametrize("seed", range(3))
def test_easy_instance_finds_top_arms(seed):
    r = simulate(BanditConfig(EASY.K, EASY.M, EASY.horizon, EASY.means, seed), beta=1.5)
    for a in r.agents:
        assert sorted(a.accepted) == [0, 1, 2]
    assert collision_free_after_init(r.trace)
    # once everything is accepted the group plays the top arms forever
    tail = r.trace.arms[-1000:]
    assert all(sorted(row) == [0, 1, 2] for row in tail.tolist())


def test_agents_share_identical_tables():
    r = simulate(EASY, beta=1.5)
    assert r.agents[0].comm_rounds > 0
    assert all(a.snapshots == r.agents[0].snapshots for a in r.agents)
    assert all(a.accepted == r.agents[0].accepted for a in r.agents)
    assert sorted(a.rank for a in r.agents) == [0, 1, 2]


def test_single_agent_regret_is_sublinear():
    means = (0.9, 0.5)
    regrets = []
    for T in (20_000, 80_000):
        r = simulate(BanditConfig(2, 1, T, means, 0), beta=4.0)
        best = max(means) * T
        regrets.append(best - sum(means[a] for a in r.trace.arms[:, 0]))
    assert regrets[1] < 2 * regrets[0]


def test_acceptance_order_is_consistent():
    r = simulate(EASY, beta=1.5)
    acc = r.agents[0].accepted
    assert len(acc) == len(set(acc)) == 3
