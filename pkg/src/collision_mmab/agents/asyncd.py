"""Periodic-activation variant: agent m may act only at steps t with t mod period_m == 0.

All coordination (initialization, period exchange, communication rounds, mark
broadcasts) happens on steps that are multiples of the least common multiple
of the periods, where every agent is active. Exploration phases last
``lcm * len(active)`` steps; at each step the active agents, ordered by rank,
sweep the active arms so that no two of them collide.
"""

from __future__ import annotations

import math
from typing import Sequence

import numpy as np

from ..codec import DeltaMessage, receive_protocol, send_protocol, wait_protocol
from ..env import BlockObservation, Observation
from ..errors import ConfigError, ProtocolDesync
from ..phases import IDLE, Phase
from .base import PooledLearner
from .elimination import reject_scan, sort_check
from .init_phase import init_phase

EXPLOIT_CYCLES_MIN_STEPS = 2000


class ActivationSchedule:
    """Deterministic periodic activity pattern (steps are 1-based)."""

    def __init__(self, periods: Sequence[int]):
        periods = tuple(int(p) for p in periods)
        if not periods or any(p < 1 for p in periods):
            raise ConfigError("periods must be positive integers")
        self.periods = periods
        self.lcm = math.lcm(*periods)
        self._period_arr = np.array(periods)

    def is_active(self, agent: int, t: int) -> bool:
        return t % self.periods[agent] == 0

    def active_mask(self, steps: np.ndarray) -> np.ndarray:
        """(len(steps), M) boolean activity mask."""
        return np.asarray(steps)[:, None] % self._period_arr[None, :] == 0

    def active_agents(self, t: int) -> list[int]:
        return [m for m, p in enumerate(self.periods) if t % p == 0]

    def activity_counts(self) -> list[int]:
        """Number of active agents at t = 1..lcm."""
        return [len(self.active_agents(t)) for t in range(1, self.lcm + 1)]

    def level_frequencies(self) -> dict[int, float]:
        """Fraction of steps in one cycle at which exactly I agents are active, for each I."""
        counts = self.activity_counts()
        return {level: counts.count(level) / self.lcm for level in sorted(set(counts))}

    def activity_levels(self) -> list[int]:
        """Distinct positive numbers of simultaneously active agents."""
        return sorted({c for c in self.activity_counts() if c > 0})


def period_exchange(rank: int, n_agents: int, own_period: int, max_bits: int):
    """Every rank tells every other rank its period. Returns a list indexed by rank."""
    anchors = tuple(range(n_agents))
    known: dict[int, int] = {rank: own_period}
    msg = DeltaMessage(1, format(own_period, "b"))
    for i in range(n_agents):
        for l in range(n_agents):
            if i == l:
                continue
            if i == rank:
                yield from send_protocol(msg, anchors, rank, l)
            elif l == rank:
                got = yield from receive_protocol(anchors, rank, i, max_bits)
                known[i] = int(got.payload or "0", 2)
            else:
                yield from wait_protocol(anchors, rank, i, l, max_bits)
    return [known[r] for r in range(n_agents)]


class PeriodicAgent(PooledLearner):
    """Agent acting under a periodic activation schedule; rejects, sorts, then exploits."""

    def __init__(self, K: int, horizon: int, periods: Sequence[int], own_period: int,
                 beta: float = 4.0, delta: float | None = None, rng=None):
        super().__init__(K, horizon, beta, delta, rng)
        self.periods = tuple(periods)
        self.own_period = int(own_period)
        self.lcm = math.lcm(*self.periods)
        self.t = 0
        self.sorted_at: int | None = None
        self.top: list[int] | None = None
        self._phases_counted = np.zeros(K)

    # -- clock helpers -----------------------------------------------------------

    def _on_lcm_slots(self, proto):
        """Play ``proto`` on the next LCM-aligned steps, idling on the steps in between."""
        l = self.lcm
        try:
            action = next(proto)
        except StopIteration as stop:
            return stop.value
        while True:
            if self.t % l:
                raise ProtocolDesync("coordination started off an LCM boundary")
            if isinstance(action, np.ndarray):
                n = len(action)
                if l == 1:
                    reply = yield action
                else:
                    wide = np.full(n * l, IDLE, dtype=np.int64)
                    wide[l - 1::l] = action
                    obs = yield wide
                    reply = BlockObservation(obs.arms[l - 1::l], obs.collisions[l - 1::l], obs.rewards[l - 1::l])
                self.t += n * l
            else:
                if l == 1:
                    reply = yield action
                else:
                    wide = np.full(l, IDLE, dtype=np.int64)
                    wide[-1] = action
                    obs = yield wide
                    hit = bool(obs.collisions[-1])
                    reply = Observation(int(action), int(hit), int(obs.rewards[-1]))
                self.t += l
            try:
                action = proto.send(reply)
            except StopIteration as stop:
                return stop.value

    def _active_ranks(self, step_in_cycle: int) -> list[int]:
        return [r for r in range(self.M) if step_in_cycle % self.rank_periods[r] == 0]

    # -- main loop ---------------------------------------------------------------

    def run(self):
        self.phase = Phase.INIT
        self.rank, self.M, self.state = yield from self._on_lcm_slots(init_phase(self.K, self.rng))
        if self.M != len(self.periods):
            raise ProtocolDesync("initialization counted a different number of agents")
        cap = max(self.periods).bit_length() + 1
        self.rank_periods = yield from self._on_lcm_slots(
            period_exchange(self.rank, self.M, self.own_period, cap))
        if sorted(self.rank_periods) != sorted(self.periods):
            raise ProtocolDesync("period exchange disagrees with the known period multiset")
        self.init_steps = self.t
        l = self.lcm
        self.per_phase = np.array([l // p for p in self.rank_periods], dtype=float)
        self._plan_key = None

        while True:
            signalling = self.pending is not None
            arms, pos, idx = self._plan(signalling)
            obs = yield arms
            self.t += len(arms)
            if signalling or obs.collisions.any():
                _, rej = yield from self._on_lcm_slots(self.broadcast_marks(modes=("rej",)))
                self._apply_rejections(rej)
                continue
            self._absorb(obs.rewards, pos, idx)
            if self.should_communicate():
                counts = [self.n_peer[r][self.active] for r in range(self.M)]
                yield from self._on_lcm_slots(self.communicate(counts))
                est, lcb, ucb = self.intervals()
                self._apply_rejections({self.active[i] for i in reject_scan(lcb.tolist(), ucb.tolist(), self.M)})
                est, lcb, ucb = self.intervals()
                done, top = sort_check(est.tolist(), lcb.tolist(), ucb.tolist(), self.M)
                if done:
                    self.top = [self.active[i] for i in top]
                    self.sorted_at = self.t
                    break
            else:
                _, lcb, ucb = self.intervals()
                rej = reject_scan(lcb.tolist(), ucb.tolist(), self.M)
                if rej:
                    rej = {self.active[i] for i in rej}
                    if self.M == 1:
                        self._apply_rejections(rej)
                    else:
                        self.pending = (set(), rej)

        self.phase = Phase.EXPLOIT
        cycle = np.full(l, IDLE, dtype=np.int64)
        for tau in range(l):
            ranks = self._active_ranks(tau + 1)
            if self.rank in ranks:
                cycle[tau] = self.top[ranks.index(self.rank)]
        block = np.tile(cycle, max(1, EXPLOIT_CYCLES_MIN_STEPS // l))
        while True:
            yield block
            self.t += len(block)

    @property
    def n_peer(self) -> np.ndarray:
        """Own pull count of every rank per arm, inferred from the schedule."""
        return self.per_phase[:, None] * self._phases_counted[None, :]

    def _plan(self, signalling: bool):
        key = (self._version, signalling)
        if key != self._plan_key:
            l, k_t, j = self.lcm, len(self.active), self.rank
            arms = np.full(l * k_t, IDLE, dtype=np.int64)
            pos, idx = [], []
            for s in range(k_t):
                for tau in range(l):
                    ranks = self._active_ranks(tau + 1)
                    if j in ranks:
                        a = (ranks.index(j) + s) % k_t
                        pos.append(s * l + tau)
                        idx.append(a)
                        arms[s * l + tau] = self.active[a]
            tags = np.full(l * k_t, Phase.EXPLORE, dtype=np.uint8)
            if signalling:
                for s in range(self.M - 1):
                    target = (j + 1 + s) % self.M
                    arms[s * l + l - 1] = self.active[(target + s) % k_t]
                    tags[s * l + l - 1] = Phase.SIGNAL
            self._plan_key = key
            self._plan_cache = (arms, np.array(pos, dtype=np.int64), np.array(idx, dtype=np.int64),
                                np.array(self.active, dtype=np.int64), tags)
        self.phase = self._plan_cache[4] if signalling else Phase.EXPLORE
        return self._plan_cache[:3]

    def _absorb(self, rewards, pos, idx) -> None:
        act = self._plan_cache[3]
        self.X[act] += np.bincount(idx, weights=rewards[pos], minlength=len(act))
        self.n[act] += self.lcm // self.own_period
        self.T[act] += self.per_phase.sum()
        self._phases_counted[act] += 1

    def _apply_rejections(self, rejected) -> None:
        for k in sorted(set(rejected) & set(self.active)):
            if len(self.active) > self.M:
                self.active.remove(k)
                self.rejected.append(k)
        self._version += 1
