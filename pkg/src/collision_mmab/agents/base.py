"""State and communication logic shared by the synchronous and periodic agents."""

from __future__ import annotations

import math

import numpy as np

from ..codec import (anchor_arms, comm_a, comm_round, make_delta, quantize, reconstruct,
                     QuantizedMean)
from ..errors import InternalInconsistency, NotYetSampled
from ..phases import Phase
from .elimination import ecr_trigger, error_rate, radius


class PooledLearner:
    """Per-agent statistics with periodic pooling of quantized means.

    Counts are kept for every arm: own pulls ``n`` and reward sums ``X``, the
    global pull count ``T`` (known from the schedule), and snapshots taken at the
    last communication round. ``pooled_last[k]`` holds the sum over agents of
    (their pull count at the snapshot) times (their quantized mean).
    """

    def __init__(self, K: int, horizon: int, beta: float = 4.0, delta: float | None = None,
                 rng: np.random.Generator | None = None):
        if beta <= 1:
            raise ValueError("beta must exceed 1")
        self.K = K
        self.horizon = horizon
        self.beta = float(beta)
        self.delta = 1.0 / horizon**2 if delta is None else float(delta)
        self.log_inv_delta = math.log(1.0 / self.delta)
        self.rng = rng if rng is not None else np.random.default_rng()
        self.phase = Phase.INIT
        self.rank: int | None = None
        self.M: int | None = None
        self.accepted: list[int] = []
        self.rejected: list[int] = []
        self.active: list[int] = list(range(K))
        self.n = np.zeros(K)
        self.X = np.zeros(K)
        self.T = np.zeros(K)
        self.n_last = np.zeros(K)
        self.X_last = np.zeros(K)
        self.T_last = np.zeros(K)
        self.pooled_last = np.zeros(K)
        self.ecr_last = 1.0
        self.table: dict[tuple[int, int], QuantizedMean] = {}
        self.sent: dict[int, QuantizedMean] = {}
        self.messages: list = []
        self.snapshots: list[tuple] = []
        self.comm_rounds = 0
        self.sync_rounds = 0
        self.pending: tuple[set, set] | None = None
        self.init_steps = 0
        self._version = 0
        self._act_key = self._checked_key = None

    # -- estimates ---------------------------------------------------------

    def active_array(self) -> np.ndarray:
        if self._act_key != self._version:
            self._act = np.array(self.active, dtype=np.int64)
            self._act_key = self._version
            self._checked_key = None
        return self._act

    def common_total(self) -> float:
        """Global pull count of the active arms, which the schedule keeps equal."""
        act = self.active_array()
        if not act.size:
            return 0.0
        if self._checked_key != self._version:
            # increments are uniform over the active set, so one check per set change suffices
            vals = self.T[act]
            if vals.min() != vals.max():
                raise InternalInconsistency("global pull counts differ across active arms")
            self._checked_key = self._version
        return float(self.T[self.active[0]])

    def estimates(self) -> np.ndarray:
        """Pooled estimates of the active arms, in the order of ``self.active``."""
        den = (self.T_last + self.n - self.n_last)[self.active_array()]
        if not den.all():
            raise NotYetSampled("pooled estimate without samples")
        return (self.pooled_last + self.X - self.X_last)[self._act] / den

    def intervals(self):
        """Estimates, lower and upper confidence bounds of the active arms."""
        est = self.estimates()
        rad = radius(self.common_total(), self.beta, self.log_inv_delta)
        return est, est - rad, est + rad

    def should_communicate(self) -> bool:
        return ecr_trigger(self.common_total(), self.ecr_last, self.beta, self.log_inv_delta)

    # -- communication ---------------------------------------------------------

    def anchors(self) -> tuple[int, ...]:
        return anchor_arms(self.accepted, self.active, self.M)

    def communicate(self, peer_counts: np.ndarray):
        """Exchange quantized means of the active arms with every other agent.

        ``peer_counts[r]`` is rank r's own pull count per active arm, which every
        agent can infer from the schedule.
        """
        self.phase = Phase.COMM
        total = self.common_total()
        self.ecr_last = error_rate(total, self.log_inv_delta)
        arms = list(self.active)
        precision, outgoing, first, current = {}, {}, {}, {}
        for k in arms:
            q = quantize(self.X[k] / self.n[k], int(self.T[k]))
            current[k] = q
            precision[k] = q.bits
            first[k] = k not in self.sent
            outgoing[k] = make_delta(q, self.sent.get(k), arm=k)
        received = yield from comm_round(self.rank, self.M, self.anchors(), arms, outgoing, precision,
                                         first, self.messages, self.comm_rounds)
        for (sender, k), msg in received.items():
            self.table[(sender, k)] = reconstruct(self.table.get((sender, k)), msg, precision[k], int(self.T[k]))
        for k in arms:
            self.table[(self.rank, k)] = current[k]
            self.sent[k] = current[k]
        act = np.array(arms)
        self.n_last[act] = self.n[act]
        self.X_last[act] = self.X[act]
        self.T_last[act] = self.T[act]
        for idx, k in enumerate(arms):
            self.pooled_last[k] = sum(peer_counts[r][idx] * self.table[(r, k)].value for r in range(self.M))
        self.comm_rounds += 1
        self.snapshots.append((
            self.comm_rounds,
            tuple((r, k, self.table[(r, k)].level, self.table[(r, k)].bits) for k in arms for r in range(self.M)),
            tuple(float(self.T_last[k]) for k in arms),
            tuple(float(self.pooled_last[k]) for k in arms),
        ))

    def broadcast_marks(self, modes=("acc", "rej")):
        """Share pending accept/reject marks; returns the unions over all agents."""
        self.phase = Phase.COMM_A
        acc, rej = self.pending if self.pending is not None else (set(), set())
        marks = {"acc": acc, "rej": rej}
        received = yield from comm_a(self.rank, self.M, self.anchors(), list(self.active), marks, modes)
        self.pending = None
        self.sync_rounds += 1
        return received.get("acc", set()), received.get("rej", set())

    # -- set updates -----------------------------------------------------------

    def apply_decisions(self, accepted, rejected) -> None:
        """Apply accept/reject marks identically on every agent.

        Arms marked both ways are dropped. Acceptances go in index order while
        there is room; rejections keep at least as many active arms as free agents.
        """
        accepted, rejected = set(accepted) & set(self.active), set(rejected) & set(self.active)
        both = accepted & rejected
        for k in sorted(accepted - both):
            if len(self.accepted) < self.M:
                self.accepted.append(k)
                self.active.remove(k)
        n_free = self.M - len(self.accepted)
        for k in sorted(rejected - both):
            if len(self.active) - 1 >= n_free and n_free > 0:
                self.active.remove(k)
                self.rejected.append(k)
        if 0 < n_free == len(self.active):
            self.accepted.extend(self.active)
            self.active = []
        self._version += 1
