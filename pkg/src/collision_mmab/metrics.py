"""Regret accounting, communication accounting and reference bounds."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .codec import MessageRecord
from .env import BanditConfig, Trace
from .phases import COMM_PHASES, IDLE, Phase

STEP_INIT, STEP_COMM, STEP_EXPLO = 0, 1, 2


def _pulled_means(trace: Trace, means: Sequence[float]) -> np.ndarray:
    """Mean of each (step, agent) pull, zero for idle agents and collisions."""
    mu = np.append(np.asarray(means, dtype=float), 0.0)  # index -1 maps to the appended zero
    return mu[trace.arms.astype(np.int64)] * ~trace.collisions


def optimal_sum(means: Sequence[float], n_agents: int) -> float:
    return float(np.sort(np.asarray(means, dtype=float))[::-1][:n_agents].sum())


def step_regret(trace: Trace, means: Sequence[float]) -> np.ndarray:
    """Per-step pseudo-regret against the best M arms held collision-free."""
    return optimal_sum(means, trace.arms.shape[1]) - _pulled_means(trace, means).sum(axis=1)


def group_regret(trace: Trace, means: Sequence[float], *, realized: bool = False) -> float:
    """Cumulative group regret over the whole trace (pseudo by default, realized on request)."""
    if realized:
        best = optimal_sum(means, trace.arms.shape[1]) * len(trace)
        return float(best - trace.rewards.sum(dtype=np.int64))
    return float(step_regret(trace, means).sum())


def agent_deficits(trace: Trace, means: Sequence[float]) -> np.ndarray:
    """Each agent's pseudo-regret against the average of the best M means."""
    M = trace.arms.shape[1]
    fair_share = optimal_sum(means, M) / M
    return fair_share * len(trace) - _pulled_means(trace, means).sum(axis=0)


def individual_regret(trace: Trace, means: Sequence[float]) -> float:
    """Largest per-agent deficit."""
    return float(agent_deficits(trace, means).max())


def step_classes(trace: Trace) -> np.ndarray:
    """Classify each step as init, communication or exploration/exploitation.

    A step counts as communication if any agent tagged it as a codec round, a
    mark broadcast or a signalling slot; it counts as init if any agent was
    still initializing.
    """
    phases = trace.phases
    cls = np.full(len(trace), STEP_EXPLO, dtype=np.uint8)
    cls[np.isin(phases, COMM_PHASES).any(axis=1)] = STEP_COMM
    cls[(phases == Phase.INIT).any(axis=1)] = STEP_INIT
    return cls


def decompose(trace: Trace, means: Sequence[float],
              per_step: np.ndarray | None = None) -> tuple[float, float, float]:
    """(init, communication, exploration) parts of the group pseudo-regret.

    Pass ``per_step`` to split a different per-step regret, such as the dynamic one.
    """
    reg = step_regret(trace, means) if per_step is None else per_step
    cls = step_classes(trace)
    return tuple(float(reg[cls == c].sum()) for c in (STEP_INIT, STEP_COMM, STEP_EXPLO))


def regret_curve(trace: Trace, means: Sequence[float], checkpoints: Iterable[int],
                 per_step: np.ndarray | None = None) -> np.ndarray:
    """Cumulative pseudo-regret after each checkpoint step (1-based)."""
    reg = step_regret(trace, means) if per_step is None else per_step
    cum = np.cumsum(reg)
    idx = np.asarray(list(checkpoints), dtype=np.int64) - 1
    return cum[idx]


def collision_free_after_init(trace: Trace) -> bool:
    """No collision at any step where no agent was initializing, communicating or signalling."""
    allowed = np.isin(trace.phases, (Phase.INIT,) + COMM_PHASES).any(axis=1)
    return not trace.collisions[~allowed].any()


# -- periodic activation -------------------------------------------------------

def dynamic_step_regret(trace: Trace, means: Sequence[float]) -> np.ndarray:
    """Per-step regret against the best |A(t)| arms, A(t) being the active agents."""
    best = np.concatenate([[0.0], np.cumsum(np.sort(np.asarray(means, dtype=float))[::-1])])
    n_active = trace.active.sum(axis=1)
    return best[n_active] - (_pulled_means(trace, means) * trace.active).sum(axis=1)


def async_regret(trace: Trace, means: Sequence[float]) -> float:
    return float(dynamic_step_regret(trace, means).sum())


def dynamic_optimal_sets(trace: Trace, means: Sequence[float]) -> list[frozenset]:
    order = sorted(range(len(means)), key=lambda k: (-means[k], k))
    return [frozenset(order[:c]) for c in trace.active.sum(axis=1)]


def matches_dynamic_optimum(trace: Trace, means: Sequence[float], start: int = 0) -> bool:
    """Whether, from step ``start`` on, the active agents always hold exactly the top-|A(t)| arms."""
    order = np.argsort(-np.asarray(means, dtype=float), kind="stable")
    rank_of = np.empty(len(means) + 1, dtype=np.int64)
    rank_of[order] = np.arange(len(means))
    rank_of[-1] = -1
    arms = trace.arms[start:].astype(np.int64)
    active = trace.active[start:]
    n_active = active.sum(axis=1)
    ranks = np.where(active, rank_of[arms], -1)
    in_top = ((ranks < n_active[:, None]) & (ranks >= 0)) | ~active
    distinct = ~(trace.collisions[start:] & active).any(axis=1)
    # distinct top ranks held by exactly |A(t)| active agents means the set is the top-|A(t)| set
    return bool(in_top.all() and distinct.all() and (active.sum(axis=1) == (ranks >= 0).sum(axis=1)).all())


def dynamic_gaps(means: Sequence[float], levels: Iterable[int]) -> np.ndarray:
    """Per-arm gap to the closest critical arm above it, over all activity levels.

    For the arm of rank r (1-based), the gap is min over levels I < r of
    mu(rank I) - mu(arm); arms at or above the smallest level get infinity.
    Returned in arm-index order.
    """
    means = np.asarray(means, dtype=float)
    order = np.argsort(-means, kind="stable")
    sorted_means = means[order]
    levels = sorted(set(int(x) for x in levels if x > 0))
    gaps = np.full(len(means), np.inf)
    for r in range(1, len(means) + 1):
        below = [lvl for lvl in levels if lvl < r]
        if below:
            gaps[order[r - 1]] = sorted_means[below[-1] - 1] - sorted_means[r - 1]
    return gaps


def lower_bound_constant(means: Sequence[float], levels: Iterable[int]) -> float:
    """Sum of 1/gap over arms with a positive finite dynamic gap."""
    gaps = dynamic_gaps(means, levels)
    ok = np.isfinite(gaps) & (gaps > 0)
    return float((1.0 / gaps[ok]).sum())


# -- communication -------------------------------------------------------------

@dataclass(frozen=True)
class CommAccounting:
    rounds: int
    mark_rounds: int
    messages: int
    total_bits: int
    first_message_bits: tuple[int, ...]
    first_message_expected: tuple[int, ...]
    mean_differential_bits: float

    @property
    def first_messages_exact(self) -> bool:
        return self.first_message_bits == self.first_message_expected


def _segments(mask: np.ndarray) -> int:
    if not mask.size:
        return 0
    return int(mask[0]) + int((mask[1:] & ~mask[:-1]).sum())


def comm_accounting(trace: Trace, messages: Sequence[MessageRecord]) -> CommAccounting:
    """Count codec rounds from the trace tags and payload bits from the sender logs."""
    rounds = _segments((trace.phases == Phase.COMM).any(axis=1))
    mark_rounds = _segments((trace.phases == Phase.COMM_A).any(axis=1))
    first = [m for m in messages if m.first]
    diff = [m.wire_bits - 1 for m in messages if not m.first]
    return CommAccounting(
        rounds=rounds,
        mark_rounds=mark_rounds,
        messages=len(messages),
        total_bits=sum(m.wire_bits for m in messages),
        first_message_bits=tuple(m.wire_bits for m in first),
        first_message_expected=tuple(m.precision + 1 for m in first),
        mean_differential_bits=float(np.mean(diff)) if diff else 0.0,
    )


# -- reference bounds ----------------------------------------------------------

def boundary_gaps(means: Sequence[float], n_agents: int) -> np.ndarray:
    """Per-arm gap to the optimal/suboptimal boundary, in arm-index order.

    Optimal arms (rank <= M) use mu(arm) - mu(rank M+1); the others use mu(rank M) - mu(arm).
    """
    means = np.asarray(means, dtype=float)
    order = np.argsort(-means, kind="stable")
    s = means[order]
    gaps = np.empty(len(means))
    for r, k in enumerate(order):
        gaps[k] = s[r] - s[n_agents] if r < n_agents else s[n_agents - 1] - s[r]
    return gaps


def comm_rounds_bound(means: Sequence[float], n_agents: int, beta: float) -> float:
    """Upper bound on the number of communication rounds: sum_k log_beta(8 beta / gap_k)."""
    gaps = boundary_gaps(means, n_agents)
    return float(sum(math.log(8 * beta / g, beta) for g in gaps))


def message_bits_bound(n_agents: int, beta: float) -> float:
    """Bound on the mean differential payload length in bits."""
    return 7 + math.log2(1 + beta + math.sqrt(n_agents * math.log(2) / 2))


def regret_bound_reference(config: BanditConfig, beta: float, init_regret: float = 0.0) -> tuple[float, float]:
    """Reference (group, individual) regret bound evaluated for a configuration."""
    K, M, T = config.K, config.M, config.horizon
    gaps = boundary_gaps(config.means, M)
    order = np.argsort(-np.asarray(config.means), kind="stable")
    sub = [gaps[k] for k in order[M:]]
    log_t = math.log(T)
    explore = sum(32 * beta**2 * (beta + 2) * log_t / g + M * K * g for g in sub)
    first_bits = 2 * M**3 * (1 + 0.5 * math.log2(log_t / beta**2 + M * K))
    rounds = sum(math.log(8 * beta / g, beta) for g in gaps) - 1
    group = explore + init_regret + 2 * M**3 * K + first_bits + 2 * M**3 * rounds * message_bits_bound(M, beta)
    return group, group / M


@dataclass(frozen=True)
class RegretLedger:
    """Headline regret and communication figures of one run."""

    group: float
    realized: float
    individual: float
    init: float
    comm: float
    explo: float
    comm_rounds: int
    mark_rounds: int
    total_bits: int
    mean_differential_bits: float
    first_messages_exact: bool
    collision_free: bool

    @classmethod
    def from_trace(cls, trace: Trace, means: Sequence[float], messages: Sequence[MessageRecord]) -> "RegretLedger":
        init, comm, explo = decompose(trace, means)
        acc = comm_accounting(trace, messages)
        return cls(group_regret(trace, means), group_regret(trace, means, realized=True),
                   individual_regret(trace, means), init, comm, explo, acc.rounds, acc.mark_rounds,
                   acc.total_bits, acc.mean_differential_bits, acc.first_messages_exact,
                   collision_free_after_init(trace))
