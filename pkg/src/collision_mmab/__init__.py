"""Decentralized multiplayer bandits with collision sensing and implicit communication."""

from .env import BanditConfig, BanditEnv, Observation, Trace
from .phases import IDLE, Phase
from .runner import RunResult, simulate

__all__ = ["BanditConfig", "BanditEnv", "IDLE", "Observation", "Phase", "RunResult", "Trace", "simulate"]
