"""Confidence intervals and accept/reject/sort decisions shared by both agents."""

from __future__ import annotations

import math
from bisect import bisect_left, bisect_right
from typing import Sequence

from ..errors import InternalInconsistency, NotYetSampled


def radius(total_pulls: float, beta: float, log_inv_delta: float) -> float:
    """Half-width 2*beta*sqrt(log(1/delta) / (2 N)) of the interval around a pooled mean."""
    if total_pulls <= 0:
        raise NotYetSampled("confidence radius of an unsampled arm")
    return 2.0 * beta * math.sqrt(log_inv_delta / (2.0 * total_pulls))


def error_rate(total_pulls: float, log_inv_delta: float) -> float:
    """Error-control rate sqrt(log(1/delta) / (2 T)) tracked by the communication trigger."""
    return math.sqrt(log_inv_delta / (2.0 * total_pulls))


def ecr_trigger(total_pulls: float, last_rate: float, beta: float, log_inv_delta: float) -> bool:
    """True when the rate has shrunk by a factor beta since the last communication."""
    if total_pulls <= 0:
        return False
    return error_rate(total_pulls, log_inv_delta) <= last_rate / beta


def pooled_estimate(pooled_last: float, own_sum: float, own_sum_last: float,
                    total_last: float, own_count: float, own_count_last: float) -> float:
    """Shared estimate from the last round plus the agent's own samples since then."""
    den = total_last + own_count - own_count_last
    if den <= 0:
        raise NotYetSampled("pooled estimate without samples")
    return (pooled_last + own_sum - own_sum_last) / den


def accept_reject_scan(lcb: Sequence[float], ucb: Sequence[float], n_free: int) -> tuple[list[int], list[int]]:
    """Indices accepted and rejected among the active arms.

    An arm is accepted when its lower bound clears the upper bounds of at least
    ``len - n_free`` other arms, and rejected when at least ``n_free`` other
    arms have lower bounds above its upper bound. ``n_free`` is the number of
    agents still exploring.
    """
    n = len(lcb)
    sorted_ucb = sorted(ucb)
    sorted_lcb = sorted(lcb)
    accepted, rejected = [], []
    for a in range(n):
        beaten = bisect_right(sorted_ucb, lcb[a]) - (ucb[a] <= lcb[a])
        beaten_by = n - bisect_left(sorted_lcb, ucb[a]) - (lcb[a] >= ucb[a])
        acc = beaten >= n - n_free
        rej = beaten_by >= n_free
        if acc and rej:
            raise InternalInconsistency(f"arm index {a} satisfies both accept and reject rules")
        if acc:
            accepted.append(a)
        elif rej:
            rejected.append(a)
    return accepted, rejected


def reject_scan(lcb: Sequence[float], ucb: Sequence[float], n_agents: int) -> list[int]:
    """Indices dominated by at least ``n_agents`` other arms."""
    n = len(lcb)
    sorted_lcb = sorted(lcb)
    return [a for a in range(n)
            if n - bisect_left(sorted_lcb, ucb[a]) - (lcb[a] >= ucb[a]) >= n_agents]


def sort_check(estimates: Sequence[float], lcb: Sequence[float], ucb: Sequence[float],
               n_agents: int) -> tuple[bool, list[int]]:
    """Whether the best ``n_agents`` arms are ranked with certainty.

    Returns (done, top) where ``top`` lists indices by decreasing estimate. Done
    requires every consecutive pair of the top list to have disjoint intervals
    and the last one to be separated from every remaining arm.
    """
    order = sorted(range(len(estimates)), key=lambda a: (-estimates[a], a))
    top = order[:n_agents]
    chain = all(lcb[top[i]] > ucb[top[i + 1]] for i in range(len(top) - 1))
    rest = order[n_agents:]
    separated = not rest or lcb[top[-1]] > max(ucb[a] for a in rest)
    return chain and separated, top
