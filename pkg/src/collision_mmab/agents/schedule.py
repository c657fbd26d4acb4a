"""Collision-free exploration schedule of the synchronous agent.

Within a phase of ``len(active)`` cycles of M steps, the agent of rank j at
cycle position p looks at d = (p - j) mod M. The first ``len(accepted)``
offsets exploit accepted arms; the remaining offsets sweep the active arms,
shifted by one every cycle so each explorer visits every active arm once.
"""

from __future__ import annotations

from typing import Sequence

import numpy as np

from ..errors import InternalInconsistency


def exploit_slots(rank: int, n_agents: int, n_free: int) -> list[int]:
    """Cycle positions at which ``rank`` pulls an accepted arm."""
    end = rank + n_agents - n_free
    if end <= n_agents:
        return list(range(rank, end))
    return list(range(rank, n_agents)) + list(range(0, end - n_agents))


def choose_action(rank: int, position: int, cycle: int, n_agents: int,
                  accepted: Sequence[int], active: Sequence[int]) -> int:
    """Arm pulled by ``rank`` at ``position`` of cycle ``cycle`` of the current phase."""
    n_acc = len(accepted)
    d = (position - rank) % n_agents
    if d < n_acc:
        return accepted[d]
    if not active:
        raise InternalInconsistency("exploration slot with no active arm")
    return active[(d - n_acc + cycle) % len(active)]


def phase_plan(rank: int, n_agents: int, accepted: Sequence[int], active: Sequence[int]):
    """Arms for a whole exploration phase plus the positions and active indices of explore pulls."""
    n_acc, k_t = len(accepted), len(active)
    arms, explore_pos, explore_idx = [], [], []
    for c in range(k_t):
        for p in range(n_agents):
            d = (p - rank) % n_agents
            if d < n_acc:
                arms.append(accepted[d])
            else:
                idx = (d - n_acc + c) % k_t
                explore_pos.append(len(arms))
                explore_idx.append(idx)
                arms.append(active[idx])
    return np.array(arms, dtype=np.int64), np.array(explore_pos, dtype=np.int64), np.array(explore_idx, dtype=np.int64)


def signal_cycle(rank: int, n_agents: int, accepted: Sequence[int], active: Sequence[int]) -> list[int]:
    """First-cycle arms of a signalling agent: it lands on every other rank's scheduled arm once."""
    arms = []
    for p in range(n_agents):
        target = (rank + 1 + p) % n_agents if p < n_agents - 1 else rank
        arms.append(choose_action(target, p, 0, n_agents, accepted, active))
    return arms


def exploit_plan(rank: int, accepted: Sequence[int], cycles: int) -> np.ndarray:
    n_agents = len(accepted)
    cycle = [accepted[(p - rank) % n_agents] for p in range(n_agents)]
    return np.tile(np.array(cycle, dtype=np.int64), cycles)
