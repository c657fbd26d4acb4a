"""Lockstep driver connecting agent generators to the environment.

Every agent exposes ``run()`` returning a generator and a ``phase`` attribute
(an int tag, or an array of per-step tags for a block). At each turn the agents
yield either an arm (one step) or a numpy array of arms (a block of steps whose
choices do not depend on observations inside the block). All agents must yield
the same kind of action with the same length, otherwise the driver raises
ProtocolDesync. A block is stepped exactly as if its rows were played one by
one; blocks are only an execution shortcut.

An agent in the middle of routine exploration may instead yield a
``Speculation``: several identical phases at once. After seeing the outcome it
yields a ``Claim`` naming the first phase whose end would change its behaviour.
The driver keeps the steps up to the earliest claim over all agents, rewinds
the environment past it, and sends that phase index back. Because nothing an
agent does inside the kept prefix depends on the discarded steps, this plays
out exactly like stepping phase by phase.
"""

from __future__ import annotations

from typing import Callable, NamedTuple, Sequence

import numpy as np

from .env import BanditEnv, BlockObservation
from .errors import InitWatchdogExpired, ProtocolDesync
from .phases import IDLE, Phase


class Speculation(NamedTuple):
    arms: np.ndarray
    phase_len: int


class Claim(NamedTuple):
    phase: int


class ProtocolProcess:
    """Wrap a bare generator so it can be driven like an agent."""

    def __init__(self, gen, phase: int = Phase.COMM):
        self._gen = gen
        self.phase = phase

    def run(self):
        return self._gen


def _is_scalar(action) -> bool:
    return isinstance(action, (int, np.integer))


def drive(env: BanditEnv, agents: Sequence, *, init_step_limit: int | None = None,
          active_fn: Callable[[np.ndarray], np.ndarray] | None = None,
          reward_totals: list | None = None) -> list:
    """Run ``agents`` until the horizon or until every generator returns.

    Args:
        env: environment to step; its column m belongs to ``agents[m]``.
        init_step_limit: raise InitWatchdogExpired if any agent is still tagged
            INIT after this many steps.
        active_fn: maps an array of 1-based step numbers to an (n, M) activity
            mask; inactive agents must idle.
        reward_totals: optional list that receives each agent's summed observed reward.

    Returns:
        The generators' return values (None for those cut off by the horizon).
    """
    M = len(agents)
    if M != env.M:
        raise ProtocolDesync(f"{M} agents for an environment with {env.M} columns")
    gens = [a.run() for a in agents]
    results = [None] * M
    totals = [0] * M
    actions = []
    finished = 0
    for m, g in enumerate(gens):
        try:
            actions.append(next(g))
        except StopIteration as stop:
            results[m] = stop.value
            actions.append(None)
            finished += 1
    if finished:
        if finished != M:
            raise ProtocolDesync("agents finished at different times")
        return results

    while env.t < env.horizon:
        if all(_is_scalar(a) for a in actions):
            active = None
            if active_fn is not None:
                active = active_fn(np.array([env.t + 1]))[0]
                _check_idle(np.array([actions]), active[None, :])
            out = env.step(actions, [int(a.phase) for a in agents], active)
            obs = [env.observation_for(m, out) for m in range(M)]
            for m in range(M):
                totals[m] += obs[m].reward
            steps = 1
        elif any(isinstance(a, Speculation) for a in actions):
            if _speculate(env, agents, gens, actions, totals, active_fn):
                break
            continue
        else:
            blocks = [np.atleast_1d(np.asarray(a)) for a in actions]
            n = len(blocks[0])
            if any(len(b) != n for b in blocks):
                raise ProtocolDesync(f"block lengths differ: {[len(b) for b in blocks]}")
            steps = min(n, env.horizon - env.t)
            A = np.empty((steps, M), dtype=np.int64)
            P = np.empty((steps, M), dtype=np.uint8)
            for m in range(M):
                A[:, m] = blocks[m][:steps]
                tag = agents[m].phase
                P[:, m] = tag[:steps] if isinstance(tag, np.ndarray) else tag
            active = None
            if active_fn is not None:
                active = active_fn(np.arange(env.t + 1, env.t + steps + 1))
                _check_idle(A, active)
            out = env.step_block(A, P, active)
            if steps < n:
                break
            obs = [BlockObservation(out.arms[:, m], out.collisions[:, m], out.rewards[:, m]) for m in range(M)]
            for m in range(M):
                totals[m] += int(out.rewards[:, m].sum())

        if init_step_limit is not None and env.t > init_step_limit:
            if any(_tag_is_init(a.phase) for a in agents):
                raise InitWatchdogExpired(f"initialization still running after {env.t} steps")

        finished = 0
        for m, g in enumerate(gens):
            try:
                actions[m] = g.send(obs[m])
            except StopIteration as stop:
                results[m] = stop.value
                finished += 1
        if finished:
            if finished != M:
                raise ProtocolDesync("agents finished at different times")
            break

    for g in gens:
        g.close()
    if reward_totals is not None:
        reward_totals[:] = totals
    return results


def _tag_is_init(tag) -> bool:
    if isinstance(tag, np.ndarray):
        return bool((tag == Phase.INIT).any())
    return tag == Phase.INIT


def _check_idle(actions: np.ndarray, active: np.ndarray) -> None:
    if ((actions != IDLE) & ~active).any():
        raise ProtocolDesync("an inactive agent tried to pull an arm")


def _speculate(env: BanditEnv, agents, gens, actions, totals, active_fn=None) -> bool:
    """Play a speculative block and update ``actions`` in place. Returns True at the horizon."""
    M = len(agents)
    spec = [isinstance(a, Speculation) for a in actions]
    phase_len = {a.phase_len for a in actions if isinstance(a, Speculation)}
    if len(phase_len) != 1:
        raise ProtocolDesync("speculating agents disagree on the phase length")
    phase_len = phase_len.pop()
    arms = [a.arms if isinstance(a, Speculation) else np.atleast_1d(np.asarray(a)) for a in actions]
    n = min(len(x) for x in arms)
    if n % phase_len or any(not is_spec and len(x) != phase_len for x, is_spec in zip(arms, spec)):
        raise ProtocolDesync("plain block does not match the speculative phase length")
    steps = min(n, env.horizon - env.t)
    A = np.empty((steps, M), dtype=np.int64)
    P = np.empty((steps, M), dtype=np.uint8)
    for m in range(M):
        A[:, m] = arms[m][:steps]
        tag = agents[m].phase
        P[:, m] = tag[:steps] if isinstance(tag, np.ndarray) else tag
    active = None
    if active_fn is not None:
        active = active_fn(np.arange(env.t + 1, env.t + steps + 1))
        _check_idle(A, active)
    mark = env.checkpoint(steps)
    out = env.step_block(A, P, active)
    if steps < n:
        return True
    claims = []
    for m in range(M):
        if spec[m]:
            claim = gens[m].send(BlockObservation(out.arms[:, m], out.collisions[:, m], out.rewards[:, m]))
            if not isinstance(claim, Claim):
                raise ProtocolDesync("speculating agent did not return a claim")
            claims.append(claim.phase)
    first = min(claims)
    keep = (first + 1) * phase_len
    env.rewind(mark, keep)
    for m in range(M):
        totals[m] += int(out.rewards[:keep, m].sum())
        if spec[m]:
            actions[m] = gens[m].send(first)
        else:
            # a plain block is one phase long, so nothing it saw was discarded
            actions[m] = gens[m].send(BlockObservation(out.arms[:, m], out.collisions[:, m], out.rewards[:, m]))
    return False
