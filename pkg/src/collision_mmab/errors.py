"""Exception types raised across the simulator."""


class ConfigError(ValueError):
    """Invalid bandit or experiment configuration (including illegal arm indices)."""


class HorizonExceeded(RuntimeError):
    """An environment was stepped past its horizon."""


class PreconditionError(ValueError):
    """A pure function was called outside its documented domain."""


class ProtocolDesync(RuntimeError):
    """Agents disagree on the shape or length of a coordinated protocol step."""


class InternalInconsistency(RuntimeError):
    """A state that the coordination protocol should make impossible was reached."""


class NotYetSampled(ValueError):
    """An estimate was requested for an arm with no samples."""


class InitWatchdogExpired(RuntimeError):
    """Initialization ran far longer than its expected duration."""
