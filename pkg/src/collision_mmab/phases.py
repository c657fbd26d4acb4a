from enum import IntEnum

IDLE = -1


class Phase(IntEnum):
    """Per-step tag recorded in the trace for each agent."""

    INIT = 0
    EXPLORE = 1
    COMM = 2
    COMM_A = 3
    SIGNAL = 4
    EXPLOIT = 5


# tags that legitimately produce collisions after initialization
COLLIDING_PHASES = (Phase.INIT, Phase.COMM, Phase.COMM_A, Phase.SIGNAL)
COMM_PHASES = (Phase.COMM, Phase.COMM_A, Phase.SIGNAL)
