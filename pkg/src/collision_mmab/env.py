"""Collision-sensing multiplayer Bernoulli bandit.

Arms are 0-based everywhere inside the package; exported CSV files use
1-based arm labels. ``IDLE`` (-1) marks an agent that pulls nothing.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass
from pathlib import Path
from typing import NamedTuple, Sequence

import numpy as np

from .errors import ConfigError, HorizonExceeded
from .phases import IDLE, Phase

MAX_SEED = 2**64 - 1


@dataclass(frozen=True)
class BanditConfig:
    """Static description of a bandit instance.

    Args:
        K: number of arms.
        M: number of agents, must satisfy 1 <= M < K.
        horizon: number of global steps T.
        means: Bernoulli success probability of every arm, each in [0, 1].
        seed: master seed for all reward streams.
    """

    K: int
    M: int
    horizon: int
    means: tuple[float, ...]
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "means", tuple(float(m) for m in self.means))
        if not isinstance(self.K, (int, np.integer)) or self.K < 2:
            raise ConfigError(f"K must be an integer >= 2, got {self.K!r}")
        if not isinstance(self.M, (int, np.integer)) or not 1 <= self.M < self.K:
            raise ConfigError(f"M must satisfy 1 <= M < K, got M={self.M!r}, K={self.K}")
        if not isinstance(self.horizon, (int, np.integer)) or self.horizon < 1:
            raise ConfigError(f"horizon must be a positive integer, got {self.horizon!r}")
        if len(self.means) != self.K:
            raise ConfigError(f"expected {self.K} means, got {len(self.means)}")
        if any(not 0.0 <= m <= 1.0 for m in self.means):
            raise ConfigError("every mean must lie in [0, 1]")
        if not 0 <= self.seed <= MAX_SEED:
            raise ConfigError("seed must fit in 64 unsigned bits")

    @property
    def has_ties(self) -> bool:
        return len(set(self.means)) < self.K

    @property
    def top_arms(self) -> tuple[int, ...]:
        """Indices of the M best arms, best first (ties broken by index)."""
        order = sorted(range(self.K), key=lambda k: (-self.means[k], k))
        return tuple(order[: self.M])

    def to_dict(self) -> dict:
        return {"K": self.K, "M": self.M, "T": self.horizon, "means": list(self.means), "seed": self.seed}

    @classmethod
    def from_dict(cls, data: dict) -> "BanditConfig":
        try:
            return cls(int(data["K"]), int(data["M"]), int(data["T"]), tuple(data["means"]), int(data.get("seed", 0)))
        except KeyError as missing:
            raise ConfigError(f"missing config field {missing}") from None

    @classmethod
    def from_json(cls, path: str | Path) -> "BanditConfig":
        with open(path) as fh:
            return cls.from_dict(json.load(fh))


class Observation(NamedTuple):
    """What a single agent sees after one step; ``arm`` and ``collision`` are None when idle."""

    arm: int | None
    collision: int | None
    reward: float


class BlockObservation(NamedTuple):
    """Per-agent observation columns for a block of consecutive steps."""

    arms: np.ndarray
    collisions: np.ndarray
    rewards: np.ndarray


class RoundOutcome(NamedTuple):
    arms: tuple[int, ...]
    collisions: tuple[int | None, ...]
    rewards: tuple[float, ...]


class BlockOutcome(NamedTuple):
    arms: np.ndarray
    collisions: np.ndarray
    rewards: np.ndarray


class RewardStreams:
    """Independent Bernoulli streams, one per (arm, agent) pair.

    The i-th pull of arm k by agent m always consumes the i-th draw of stream
    (k, m), so the reward sequence of an agent on an arm never depends on what
    other agents do.
    """

    CHUNK = 8192

    def __init__(self, means: Sequence[float], n_agents: int, seed: int):
        self.K = len(means)
        self.M = n_agents
        self._means = np.repeat(np.asarray(means, dtype=float), n_agents)
        self._gens = [
            np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed, spawn_key=(0, k, m))))
            for k in range(self.K)
            for m in range(n_agents)
        ]
        self._buf = np.empty((self.K * n_agents, self.CHUNK), dtype=np.uint8)
        for s, gen in enumerate(self._gens):
            self._buf[s] = gen.random(self.CHUNK) < self._means[s]
        self._cur = np.zeros(self.K * n_agents, dtype=np.int64)

    def _refill(self, stream: int) -> None:
        cur = int(self._cur[stream])
        left = self.CHUNK - cur
        self._buf[stream, :left] = self._buf[stream, cur:]
        self._buf[stream, left:] = self._gens[stream].random(cur) < self._means[stream]
        self._cur[stream] = 0

    def draw_one(self, arm: int, agent: int) -> int:
        s = arm * self.M + agent
        cur = self._cur[s]
        if cur >= self.CHUNK:
            self._refill(s)
            cur = 0
        self._cur[s] = cur + 1
        return int(self._buf[s, cur])

    def draw_many(self, keys: np.ndarray) -> np.ndarray:
        """Draw for stream ids ``keys`` listed in time order."""
        if keys.size == 0:
            return np.zeros(0, dtype=np.uint8)
        order = np.argsort(keys, kind="stable")
        sorted_keys = keys[order]
        counts = np.bincount(keys, minlength=self._cur.size)
        if counts.max() > self.CHUNK:
            raise ValueError("block too long for the reward buffer")
        overflow = self._cur + counts > self.CHUNK
        if overflow.any():
            for s in np.flatnonzero(overflow):
                self._refill(int(s))
        starts = np.cumsum(counts) - counts
        occurrence = np.arange(sorted_keys.size) - starts[sorted_keys]
        bits_sorted = self._buf[sorted_keys, self._cur[sorted_keys] + occurrence]
        self._cur += counts
        out = np.empty(keys.size, dtype=np.uint8)
        out[order] = bits_sorted
        return out


@dataclass
class Trace:
    """Step-by-step record, one row per global step and one column per agent."""

    arms: np.ndarray
    collisions: np.ndarray
    rewards: np.ndarray
    phases: np.ndarray
    active: np.ndarray

    def __len__(self) -> int:
        return self.arms.shape[0]

    def to_csv(self, path: str | Path) -> None:
        """Write one row per (step, agent). Steps and arms are 1-based; idle rows leave arm blank."""
        names = {int(p): p.name.lower() for p in Phase}
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["t", "agent", "arm", "collision", "reward", "phase", "active"])
            T, M = self.arms.shape
            for t in range(T):
                for m in range(M):
                    arm = int(self.arms[t, m])
                    idle = arm == IDLE
                    writer.writerow([
                        t + 1, m,
                        "" if idle else arm + 1,
                        "" if idle else int(self.collisions[t, m]),
                        int(self.rewards[t, m]),
                        names[int(self.phases[t, m])],
                        int(self.active[t, m]),
                    ])


class BanditEnv:
    """Steps the shared bandit and records the full trace.

    Collisions are detected per arm: if two or more agents pull the same arm
    every one of them receives zero reward and a collision flag of 1. A reward
    draw is consumed even on collision so that streams stay aligned.
    """

    def __init__(self, config: BanditConfig):
        self.config = config
        self.K, self.M, self.horizon = config.K, config.M, config.horizon
        self.means = np.asarray(config.means, dtype=float)
        self._streams = RewardStreams(config.means, config.M, config.seed)
        T, M = self.horizon, self.M
        self._arms = np.full((T, M), IDLE, dtype=np.int16)
        self._coll = np.zeros((T, M), dtype=bool)
        self._rew = np.zeros((T, M), dtype=np.uint8)
        self._phase = np.zeros((T, M), dtype=np.uint8)
        self._active = np.ones((T, M), dtype=bool)
        self._agent_ids = np.arange(M)
        self._grids: dict[int, np.ndarray] = {}
        self.t = 0

    def _agent_grid(self, n: int) -> np.ndarray:
        grid = self._grids.get(n)
        if grid is None:
            grid = self._grids[n] = np.tile(self._agent_ids, n)
        return grid

    @property
    def remaining(self) -> int:
        return self.horizon - self.t

    @property
    def trace(self) -> Trace:
        t = self.t
        return Trace(self._arms[:t], self._coll[:t], self._rew[:t], self._phase[:t], self._active[:t])

    def checkpoint(self, reserve: int) -> tuple[int, np.ndarray]:
        """Mark the current step so that a block of up to ``reserve`` steps can be partly undone."""
        if reserve > RewardStreams.CHUNK // 2:
            raise ValueError("reserve exceeds the reward buffer")
        streams = self._streams
        for s in np.flatnonzero(streams._cur + reserve > streams.CHUNK):
            streams._refill(int(s))
        return self.t, streams._cur.copy()

    def rewind(self, mark: tuple[int, np.ndarray], keep: int) -> None:
        """Keep only the first ``keep`` steps played since ``mark`` and forget the rest.

        Reward streams resume exactly where those ``keep`` steps left them.
        """
        t0, cur = mark
        if not 0 <= keep <= self.t - t0:
            raise ValueError("cannot keep more steps than were played")
        rows = self._arms[t0:t0 + keep].ravel().astype(np.int64)
        pulled = rows >= 0
        keys = (rows * self.M + self._agent_grid(keep))[pulled]
        self._streams._cur = cur + np.bincount(keys, minlength=cur.size)
        self.t = t0 + keep

    def _check_arm(self, arm: int) -> None:
        if arm != IDLE and not 0 <= arm < self.K:
            raise ConfigError(f"arm index {arm} outside 0..{self.K - 1}")

    def step(self, actions: Sequence[int], phases=None, active=None) -> RoundOutcome:
        """Advance one step; ``actions[m]`` is agent m's arm or IDLE."""
        if self.t >= self.horizon:
            raise HorizonExceeded(f"horizon {self.horizon} reached")
        if len(actions) != self.M:
            raise ConfigError(f"expected {self.M} actions, got {len(actions)}")
        acts = [int(a) for a in actions]
        counts: dict[int, int] = {}
        for a in acts:
            self._check_arm(a)
            if a != IDLE:
                counts[a] = counts.get(a, 0) + 1
        colls, rews = [], []
        for m, a in enumerate(acts):
            if a == IDLE:
                colls.append(None)
                rews.append(0)
                continue
            draw = self._streams.draw_one(a, m)
            hit = 1 if counts[a] > 1 else 0
            colls.append(hit)
            rews.append(0 if hit else draw)
        t = self.t
        self._arms[t] = acts
        self._coll[t] = [bool(c) for c in colls]
        self._rew[t] = rews
        if phases is not None:
            self._phase[t] = phases
        if active is not None:
            self._active[t] = active
        self.t = t + 1
        return RoundOutcome(tuple(acts), tuple(colls), tuple(rews))

    def step_block(self, actions: np.ndarray, phases=None, active=None) -> BlockOutcome:
        """Advance ``len(actions)`` steps at once; row i holds every agent's arm at step i.

        Equivalent to calling :meth:`step` row by row.
        """
        actions = np.asarray(actions)
        n = actions.shape[0]
        if actions.ndim != 2 or actions.shape[1] != self.M:
            raise ConfigError(f"block must have shape (n, {self.M})")
        if self.t + n > self.horizon:
            raise HorizonExceeded(f"block of {n} steps overruns horizon {self.horizon}")
        if n == 0:
            empty = np.zeros((0, self.M))
            return BlockOutcome(actions, empty.astype(bool), empty.astype(np.uint8))
        if actions.min() < IDLE or actions.max() >= self.K:
            raise ConfigError("arm index outside the arm set")
        limit = RewardStreams.CHUNK // 2
        if n > limit:
            parts = [
                self.step_block(actions[i:i + limit],
                                None if phases is None else np.broadcast_to(phases, actions.shape)[i:i + limit],
                                None if active is None else np.broadcast_to(active, actions.shape)[i:i + limit])
                for i in range(0, n, limit)
            ]
            return BlockOutcome(*(np.concatenate(x) for x in zip(*parts)))

        pulling = actions >= 0
        same = actions[:, :, None] == actions[:, None, :]
        coll = (same.sum(axis=2) > 1) & pulling
        flat = actions.ravel()
        mask = flat >= 0
        keys = (flat * self.M + self._agent_grid(n))[mask]
        draws = np.zeros(flat.size, dtype=np.uint8)
        draws[mask] = self._streams.draw_many(keys)
        rew = draws.reshape(n, self.M)
        rew[coll] = 0

        t0, t1 = self.t, self.t + n
        self._arms[t0:t1] = actions
        self._coll[t0:t1] = coll
        self._rew[t0:t1] = rew
        if phases is not None:
            self._phase[t0:t1] = phases
        if active is not None:
            self._active[t0:t1] = active
        self.t = t1
        return BlockOutcome(actions, coll, rew)

    @staticmethod
    def observation_for(agent: int, outcome: RoundOutcome) -> Observation:
        arm = outcome.arms[agent]
        if arm == IDLE:
            return Observation(None, None, 0)
        return Observation(arm, outcome.collisions[agent], outcome.rewards[agent])

    @staticmethod
    def block_observation_for(agent: int, outcome: BlockOutcome) -> BlockObservation:
        return BlockObservation(outcome.arms[:, agent], outcome.collisions[:, agent], outcome.rewards[:, agent])
