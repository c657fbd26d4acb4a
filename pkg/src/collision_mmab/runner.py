"""Build an environment plus agents from a seed and play one run to the horizon."""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np

from .agents.asyncd import ActivationSchedule, PeriodicAgent
from .agents.init_phase import expected_orthogonalization_steps
from .agents.syncd import SynCDAgent
from .driver import drive
from .env import BanditConfig, BanditEnv, Trace

WATCHDOG_FACTOR = 50


def agent_rng(seed: int, agent: int) -> np.random.Generator:
    """Private randomness of one agent, independent of every reward stream."""
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(1, agent)))


@dataclass
class RunResult:
    config: BanditConfig
    algorithm: str
    beta: float
    trace: Trace
    agents: list
    reward_totals: list
    seconds: float
    periods: tuple | None = None
    extras: dict = field(default_factory=dict)

    @property
    def messages(self) -> list:
        return [rec for a in self.agents for rec in a.messages]

    @property
    def final_accepted(self) -> list[list[int]]:
        return [list(a.accepted) for a in self.agents]


def init_step_limit(K: int, M: int) -> int:
    return int(WATCHDOG_FACTOR * expected_orthogonalization_steps(K, M)) + 2 * K


def simulate(config: BanditConfig, beta: float = 4.0, delta: float | None = None,
             algorithm: str = "syncd", periods=None) -> RunResult:
    """Play one full run and return the trace together with the agents' logs."""
    env = BanditEnv(config)
    start = time.perf_counter()
    totals: list = []
    if algorithm == "syncd":
        agents = [SynCDAgent(config.K, config.horizon, beta, delta, agent_rng(config.seed, m))
                  for m in range(config.M)]
        drive(env, agents, init_step_limit=init_step_limit(config.K, config.M), reward_totals=totals)
    elif algorithm == "async":
        schedule = ActivationSchedule(periods)
        if len(schedule.periods) != config.M:
            raise ValueError("need one period per agent")
        agents = [PeriodicAgent(config.K, config.horizon, schedule.periods, p, beta, delta,
                                agent_rng(config.seed, m)) for m, p in enumerate(schedule.periods)]
        limit = schedule.lcm * (init_step_limit(config.K, config.M) + 64 * config.M**2)
        drive(env, agents, init_step_limit=limit, active_fn=schedule.active_mask, reward_totals=totals)
    else:
        raise ValueError(f"unknown algorithm {algorithm!r}")
    return RunResult(config, algorithm, beta, env.trace, agents, totals, time.perf_counter() - start,
                     tuple(periods) if periods is not None else None)
