"""Adaptive quantization, differential messages and the forced-collision channel.

Bits travel between agents through collisions on *anchor* arms: each rank owns
one anchor for the duration of a communication round and listens on it. The
frame layout is documented in ``docs/wire.md``.

The protocol functions here are generators. They yield the arm to pull (one
step at a time, or a numpy block for fixed-length segments) and receive the
agent's observation back, so the same code runs under the lockstep driver for
real agents and in isolation inside tests.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Mapping, Sequence

import numpy as np

from .errors import PreconditionError, ProtocolDesync


def bit_width(total_pulls: int) -> int:
    """Number of fractional bits used for an arm pulled ``total_pulls`` times in total.

    Equals ceil(1 + log2(total_pulls) / 2), computed exactly with integers.
    """
    if total_pulls < 1:
        raise PreconditionError("bit width needs at least one pull")
    return 1 + ((int(total_pulls) - 1).bit_length() + 1) // 2


@dataclass(frozen=True)
class QuantizedMean:
    """A value ``level / 2**bits`` on the dyadic grid of the given precision."""

    level: int
    bits: int
    basis_pulls: int = 0

    @property
    def value(self) -> float:
        return self.level / (1 << self.bits)

    def at_bits(self, bits: int) -> int:
        """The same value expressed as a level at a finer precision."""
        if bits < self.bits:
            raise PreconditionError("cannot coarsen a quantized value")
        return self.level << (bits - self.bits)


def quantize(raw_mean: float, total_pulls: int) -> QuantizedMean:
    """Round ``raw_mean`` up to the grid of precision ``bit_width(total_pulls)``, clamped to 1."""
    if not 0.0 <= raw_mean <= 1.0:
        raise PreconditionError(f"mean {raw_mean} outside [0, 1]")
    bits = bit_width(total_pulls)
    scale = 1 << bits
    level = min(math.ceil(raw_mean * scale), scale)
    return QuantizedMean(level, bits, int(total_pulls))


@dataclass(frozen=True)
class DeltaMessage:
    """Sign and magnitude bits sent on the wire.

    ``sign`` is +1 or -1; ``payload`` is a string of '0'/'1' with the most
    significant bit first. A first message carries the full level in a fixed
    width of ``bits`` digits; the otherwise unused pattern "negative zero"
    stands for the full-scale level 2**bits, so a first message is always
    exactly ``bits + 1`` wire bits long. Later messages carry the truncated
    difference from the previous value (no leading zeros, possibly empty).
    """

    sign: int
    payload: str
    target_agent: int | None = None
    arm: int | None = None

    def wire_bits(self) -> tuple[int, ...]:
        return (0 if self.sign > 0 else 1,) + tuple(1 if c == "1" else 0 for c in self.payload)

    @property
    def length(self) -> int:
        return 1 + len(self.payload)

    @classmethod
    def from_wire(cls, bits: Sequence[int], target_agent=None, arm=None) -> "DeltaMessage":
        if not bits:
            raise ProtocolDesync("empty message on the wire")
        return cls(-1 if bits[0] else 1, "".join("1" if b else "0" for b in bits[1:]), target_agent, arm)


def make_delta(current: QuantizedMean, last: QuantizedMean | None = None, *,
               target_agent: int | None = None, arm: int | None = None) -> DeltaMessage:
    """Encode ``current`` relative to the previously sent value ``last`` (None for the first message)."""
    b = current.bits
    if last is None:
        if current.level == 1 << b:
            return DeltaMessage(-1, "0" * b, target_agent, arm)
        return DeltaMessage(1, format(current.level, f"0{b}b") if b else "", target_agent, arm)
    if current.bits < last.bits:
        raise PreconditionError("precision never decreases between messages")
    diff = current.level - last.at_bits(b)
    return DeltaMessage(-1 if diff < 0 else 1, format(abs(diff), "b") if diff else "", target_agent, arm)


def reconstruct(last: QuantizedMean | None, message: DeltaMessage, bits: int,
                basis_pulls: int = 0) -> QuantizedMean:
    """Decode ``message`` at precision ``bits`` on top of the receiver's stored ``last`` value."""
    magnitude = int(message.payload, 2) if message.payload else 0
    if last is None:
        if message.sign < 0:
            if magnitude:
                raise ProtocolDesync("negative first message")
            magnitude = 1 << bits
        level = magnitude
    else:
        level = last.at_bits(bits) + message.sign * magnitude
    if not 0 <= level <= 1 << bits:
        raise ProtocolDesync(f"decoded level {level} outside the grid of {bits} bits")
    return QuantizedMean(level, bits, basis_pulls)


def max_data_bits(bits: int) -> int:
    """Longest legal message at this precision: sign plus up to ``bits + 1`` magnitude bits."""
    return bits + 2


def frame_steps(message_length: int, n_agents: int) -> int:
    """Steps one message occupies: data/continuation pairs, terminator pair, waiter sweep."""
    return 2 * message_length + 2 + max(n_agents - 2, 0)


def comm_schedule(n_agents: int, arms: Iterable[int]) -> list[tuple[int, int, int]]:
    """Ordered (sender rank, receiver rank, arm) triples of one communication round."""
    arms = list(arms)
    return [(i, l, k) for i in range(n_agents) for l in range(n_agents) if i != l for k in arms]


def anchor_arms(accepted: Iterable[int], active: Iterable[int], n_agents: int) -> tuple[int, ...]:
    """Anchor of each rank: the rank-th smallest arm that has not been rejected."""
    pool = sorted(set(accepted) | set(active))
    if len(pool) < n_agents:
        raise PreconditionError("fewer non-rejected arms than agents")
    return tuple(pool[:n_agents])


def _waiters(n_agents: int, sender: int, receiver: int) -> list[int]:
    return [r for r in range(n_agents) if r != sender and r != receiver]


def send_protocol(message: DeltaMessage, anchors: Sequence[int], rank: int, receiver: int):
    """Transmit ``message`` from ``rank`` to ``receiver``; yields one arm per step."""
    own, dst = anchors[rank], anchors[receiver]
    for bit in message.wire_bits():
        yield dst if bit else own
        yield own
    yield own
    yield dst
    for w in _waiters(len(anchors), rank, receiver):
        yield anchors[w]


def receive_protocol(anchors: Sequence[int], rank: int, sender: int, max_bits: int):
    """Listen on the own anchor until the terminator; returns the received DeltaMessage.

    Raises ProtocolDesync when more than ``max_bits`` data bits arrive without a terminator.
    """
    own = anchors[rank]
    bits: list[int] = []
    while True:
        obs = yield own
        bits.append(1 if obs.collision else 0)
        if len(bits) > max_bits + 1:
            raise ProtocolDesync(f"no terminator after {max_bits} data bits")
        obs = yield own
        if obs.collision:
            break
    bits.pop()  # data slot of the terminator pair
    for _ in _waiters(len(anchors), sender, rank):
        yield own
    return DeltaMessage.from_wire(bits, rank)


def wait_protocol(anchors: Sequence[int], rank: int, sender: int, receiver: int, max_bits: int):
    """Sit on the own anchor until the sender's notification hit, then realign with the others."""
    own = anchors[rank]
    waiters = _waiters(len(anchors), sender, receiver)
    limit = frame_steps(max_bits, len(anchors))
    for _ in range(limit):
        obs = yield own
        if obs.collision:
            break
    else:
        raise ProtocolDesync("waiter never notified")
    for _ in range(len(waiters) - 1 - waiters.index(rank)):
        yield own


@dataclass(frozen=True)
class MessageRecord:
    """Sender-side log entry for one transmitted message."""

    sender: int
    receiver: int
    arm: int
    wire_bits: int
    steps: int
    first: bool
    precision: int
    round_index: int


def comm_round(rank: int, n_agents: int, anchors: Sequence[int], arms: Sequence[int],
               outgoing: Mapping[int, DeltaMessage], precision: Mapping[int, int],
               first: Mapping[int, bool] | None = None, log: list | None = None, round_index: int = 0):
    """Run a full round in which every rank sends one message per arm to every other rank.

    Returns a dict mapping (sender rank, arm) to the received DeltaMessage.
    """
    received: dict[tuple[int, int], DeltaMessage] = {}
    for i, l, k in comm_schedule(n_agents, arms):
        if i == rank:
            msg = outgoing[k]
            yield from send_protocol(msg, anchors, rank, l)
            if log is not None:
                log.append(MessageRecord(rank, l, k, msg.length, frame_steps(msg.length, n_agents),
                                         bool(first and first.get(k)), precision[k], round_index))
        elif l == rank:
            msg = yield from receive_protocol(anchors, rank, i, max_data_bits(precision[k]))
            received[(i, k)] = DeltaMessage(msg.sign, msg.payload, rank, k)
        else:
            yield from wait_protocol(anchors, rank, i, l, max_data_bits(precision[k]))
    return received


def comm_a(rank: int, n_agents: int, anchors: Sequence[int], arms: Sequence[int],
           marks: Mapping[str, Iterable[int]], modes: Sequence[str] = ("acc", "rej")):
    """Broadcast arm-index marks: one step per (sender, receiver, mode, arm).

    A sender pulls the receiver's anchor for every arm it marked. Returns, per
    mode, the union of the own marks with every mark received.
    """
    own_marks = {mode: set(marks.get(mode, ())) for mode in modes}
    received = {mode: set(own_marks[mode]) for mode in modes}
    own = anchors[rank]
    idle_block = np.full(len(arms), own, dtype=np.int64)
    for i in range(n_agents):
        for l in range(n_agents):
            if i == l:
                continue
            for mode in modes:
                if i == rank:
                    yield np.array([anchors[l] if k in own_marks[mode] else own for k in arms], dtype=np.int64)
                elif l == rank:
                    obs = yield idle_block
                    received[mode].update(k for k, hit in zip(arms, obs.collisions) if hit)
                else:
                    yield idle_block
    return received
