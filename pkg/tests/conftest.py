import time
from dataclasses import replace

import numpy as np
import pytest

from collision_mmab import BanditConfig, BanditEnv, simulate
from collision_mmab.codec import max_data_bits, receive_protocol, send_protocol, wait_protocol
from collision_mmab.driver import ProtocolProcess, drive
from collision_mmab.harness import linear_means

ACCEPTANCE_LINES: list[str] = []

REFERENCE = BanditConfig(10, 5, 50_000, linear_means(10), 0)
GAP = BanditConfig(10, 5, 200_000, linear_means(10, gap=0.05), 0)
ASYNC = BanditConfig(5, 2, 200_000, linear_means(5, gap=0.1), 0)
ASYNC_PERIODS = (1, 2)


def record(criterion: str, passed: bool, detail: str) -> None:
    line = f"[{'PASS' if passed else 'FAIL'}] criterion {criterion}: {detail}"
    ACCEPTANCE_LINES.append(line)
    print(line)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


def _batch(config, seeds, **kwargs):
    start = time.perf_counter()
    runs = [simulate(replace(config, seed=s), **kwargs) for s in range(seeds)]
    return runs, time.perf_counter() - start


@pytest.fixture(scope="session")
def reference_runs():
    return _batch(REFERENCE, 20, beta=4.0)


@pytest.fixture(scope="session")
def gap_runs():
    return _batch(GAP, 40, beta=1.5)


@pytest.fixture(scope="session")
def gap_runs_short():
    return _batch(replace(GAP, horizon=50_000), 40, beta=1.5)


@pytest.fixture(scope="session")
def async_runs():
    return _batch(ASYNC, 20, beta=1.5, algorithm="async", periods=ASYNC_PERIODS)


def transmit(messages, n_agents, max_bits=None):
    """Push DeltaMessages through the collision channel of a real environment.

    Message i goes from rank i % M to a rotating receiver. Returns the
    messages as decoded by their receivers, in order.
    """
    M = n_agents
    anchors = tuple(range(M))
    plan = [(i % M, (i % M + 1 + (i // M) % (M - 1)) % M) for i in range(len(messages))]
    caps = max_bits or [max_data_bits(len(m.payload)) for m in messages]
    out = [None] * len(messages)

    def agent(rank):
        for i, (msg, (src, dst)) in enumerate(zip(messages, plan)):
            if rank == src:
                yield from send_protocol(msg, anchors, rank, dst)
            elif rank == dst:
                out[i] = yield from receive_protocol(anchors, rank, src, caps[i])
            else:
                yield from wait_protocol(anchors, rank, src, dst, caps[i])

    steps = sum(2 * m.length + 2 + max(M - 2, 0) for m in messages)
    env = BanditEnv(BanditConfig(M + 1, M, max(steps, 1), tuple([0.5] * (M + 1)), 0))
    drive(env, [ProtocolProcess(agent(r)) for r in range(M)])
    return out, env


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
