from .asyncd import ActivationSchedule, PeriodicAgent
from .syncd import SynCDAgent

__all__ = ["ActivationSchedule", "PeriodicAgent", "SynCDAgent"]
