"""Synchronous collision-sensing agent with elimination and adaptive communication."""

from __future__ import annotations

import math

import numpy as np

from ..driver import Claim, Speculation
from ..phases import Phase
from .base import PooledLearner
from .elimination import accept_reject_scan, ecr_trigger, radius
from .init_phase import init_phase
from .schedule import exploit_plan, phase_plan, signal_cycle

EXPLOIT_CYCLES = 400
SPECULATION_STEPS = 2048


class SynCDAgent(PooledLearner):
    """One decentralized agent. Knows K, the horizon and beta; learns M and its rank.

    Each exploration phase lasts ``len(active) * M`` steps. At its end the agent
    either joins a mark broadcast (if anyone signalled with a deliberate
    collision), runs a communication round (if the error-control rate dropped by
    a factor beta), or updates its local accept/reject view and signals any
    change during the next phase.

    Set ``speculate=False`` to hand the driver one phase at a time; results are
    identical either way.
    """

    def __init__(self, *args, speculate: bool = True, **kwargs):
        super().__init__(*args, **kwargs)
        self.speculate = speculate

    def run(self):
        self.phase = Phase.INIT
        self.rank, self.M, self.state = yield from init_phase(self.K, self.rng)
        self._plan_key = None
        while len(self.accepted) < self.M:
            signalling = self.pending is not None
            arms, pos, pulled = self._plan(signalling)
            length = len(arms)
            batch = 1 if signalling or not self.speculate else self._batch_phases(length)
            if batch > 1:
                self.phase = Phase.EXPLORE
                obs = yield Speculation(np.tile(arms, batch), length)
                last = yield Claim(self._first_event(obs, batch, pos, pulled, length))
                for p in range(last):
                    self._absorb(obs.rewards[p * length:(p + 1) * length], pos, pulled)
                rewards = obs.rewards[last * length:(last + 1) * length]
                collided = obs.collisions[last * length:(last + 1) * length].any()
            else:
                if signalling:
                    tags = np.full(length, Phase.EXPLORE, dtype=np.uint8)
                    tags[: self.M] = Phase.SIGNAL
                    self.phase = tags
                else:
                    self.phase = Phase.EXPLORE
                obs = yield arms
                rewards, collided = obs.rewards, obs.collisions.any()
            if signalling or collided:
                acc, rej = yield from self.broadcast_marks()
                self.apply_decisions(acc, rej)
                continue
            self._absorb(rewards, pos, pulled)
            if self.should_communicate():
                n_act = self.n[self.active]
                yield from self.communicate([n_act] * self.M)
                self._decide(apply=True)
            else:
                self._decide(apply=self.M == 1)

        self.phase = Phase.EXPLOIT
        block = exploit_plan(self.rank, self.accepted, EXPLOIT_CYCLES)
        while True:
            yield block

    def _plan(self, signalling: bool):
        key = (self._version, signalling)
        if key != self._plan_key:
            arms, pos, idx = phase_plan(self.rank, self.M, self.accepted, self.active)
            if signalling:
                arms = arms.copy()
                arms[: self.M] = signal_cycle(self.rank, self.M, self.accepted, self.active)
            act = self.active_array()
            increment = np.zeros(self.K)
            increment[act] = self.M - len(self.accepted)
            onehot = np.zeros((len(idx), self.K))
            onehot[np.arange(len(idx)), act[idx]] = 1.0
            self._plan_key = key
            self._plan_cache = (arms, pos, act[idx], increment, onehot)
        return self._plan_cache[:3]

    def _absorb(self, rewards: np.ndarray, pos: np.ndarray, pulled: np.ndarray) -> None:
        increment = self._plan_cache[3]
        self.X += np.bincount(pulled, weights=rewards[pos], minlength=self.K)
        self.n += increment
        self.T += self.M * increment

    def _scan(self, est: np.ndarray, rad: float, n_free: int):
        """Accept/reject indices for the given estimates; the spread test is only a shortcut."""
        if len(est) > n_free and est.max() - est.min() < 2 * rad:
            return [], []
        return accept_reject_scan((est - rad).tolist(), (est + rad).tolist(), n_free)

    def _decide(self, apply: bool) -> None:
        n_free = self.M - len(self.accepted)
        rad = radius(self.common_total(), self.beta, self.log_inv_delta)
        acc, rej = self._scan(self.estimates(), rad, n_free)
        if not acc and not rej:
            return
        acc = {self.active[i] for i in acc}
        rej = {self.active[i] for i in rej}
        if apply:
            self.apply_decisions(acc, rej)
        else:
            self.pending = (acc, rej)

    # -- speculation -------------------------------------------------------------

    def _batch_phases(self, length: int) -> int:
        """Phases that can run back to back: up to and including the next trigger."""
        per_phase = self.M * (self.M - len(self.accepted))
        total = self.common_total()
        cap = max(1, SPECULATION_STEPS // length)
        threshold = self.log_inv_delta / (2.0 * (self.ecr_last / self.beta) ** 2)
        p = max(1, math.ceil((threshold - total) / per_phase))
        while p > 1 and ecr_trigger(total + (p - 1) * per_phase, self.ecr_last, self.beta, self.log_inv_delta):
            p -= 1
        while p < cap and not ecr_trigger(total + p * per_phase, self.ecr_last, self.beta, self.log_inv_delta):
            p += 1
        return min(cap, p)

    def _first_event(self, obs, batch: int, pos, pulled, length: int) -> int:
        """Index of the first phase whose end would not be routine (collision or set change)."""
        batch = len(obs.rewards) // length  # a signalling peer may have cut the block short
        hits = obs.collisions.reshape(batch, length).any(axis=1)
        stop = int(np.argmax(hits)) if hits.any() else batch - 1
        if stop == 0:
            return 0
        onehot = self._plan_cache[4]
        gains = np.cumsum(obs.rewards.reshape(batch, length)[:stop, pos] @ onehot, axis=0)
        increment = self._plan_cache[3]
        act = self.active_array()
        n_free = self.M - len(self.accepted)
        steps = np.arange(1, stop + 1)
        base = self.pooled_last + self.X - self.X_last
        den0 = float((self.T_last + self.n - self.n_last)[act[0]])
        est = (base[act] + gains[:, act]) / (den0 + steps * n_free)[:, None]
        totals = self.common_total() + steps * self.M * n_free
        rads = 2.0 * self.beta * np.sqrt(self.log_inv_delta / (2.0 * totals))
        spread = est.max(axis=1) - est.min(axis=1)
        candidates = np.flatnonzero((spread >= 2 * rads - 1e-9) | (len(act) <= n_free))
        for p in candidates:
            # replay the exact arithmetic of the phase-by-phase path
            X = self.X + gains[p]
            n = self.n + (p + 1) * increment
            T = self.T + (p + 1) * self.M * increment
            exact = (self.pooled_last + X - self.X_last)[act] / (self.T_last + n - self.n_last)[act]
            acc, rej = self._scan(exact, radius(float(T[act[0]]), self.beta, self.log_inv_delta), n_free)
            if acc or rej:
                return int(p)
        return stop
