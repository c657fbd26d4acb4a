"""Decentralized initialization: orthogonalization then rank assignment.

Internal arm ``K - 1`` is reserved as the detection arm during
orthogonalization; states 1..K-1 correspond to arms 0..K-2.
"""

from __future__ import annotations

import numpy as np


def expected_orthogonalization_steps(K: int, M: int) -> float:
    """Upper bound on the expected length of the orthogonalization stage."""
    return M * (K - 1) * (K + 1) / (K - M)


def orthogonalize(K: int, rng: np.random.Generator):
    """Settle on a private arm. Returns the state in 1..K-1.

    Rounds come in blocks of K + 1: one settle round, then K detection rounds in
    which a settled player in state s visits the detection arm only in round s
    while unsettled players stay there throughout. A block with no collision
    observed during detection means everyone is settled.
    """
    detect = K - 1
    state = 0
    while True:
        arm = state - 1 if state else int(rng.integers(K - 1))
        obs = yield arm
        if not state and not obs.collision:
            state = arm + 1
        if state:
            plan = np.full(K, state - 1, dtype=np.int64)
            plan[state - 1] = detect
        else:
            plan = np.full(K, detect, dtype=np.int64)
        obs = yield plan
        if not obs.collisions.any():
            return state


def rank_assignment_plan(K: int, state: int) -> np.ndarray:
    """Arms pulled over the 2K - 2 rank-assignment rounds by a player in ``state``."""
    rounds = np.arange(1, 2 * K - 1)
    plan = np.where((rounds <= 2 * state) | (rounds >= K + state), state, rounds - state)
    return plan - 1


def rank_assign(K: int, state: int):
    """Returns (rank, number of players): rank counts collisions in the first 2*state rounds."""
    obs = yield rank_assignment_plan(K, state)
    hits = np.asarray(obs.collisions, dtype=bool)
    return int(hits[: 2 * state].sum()), int(hits.sum()) + 1


def init_phase(K: int, rng: np.random.Generator):
    """Full initialization. Returns (rank, number of agents, state)."""
    state = yield from orthogonalize(K, rng)
    rank, n_agents = yield from rank_assign(K, state)
    return rank, n_agents, state
