"""Schedule-synchronized message transfer keyed by a shared secret.

The two parties derive, from their shared primary key, a pair of bases, a
photon timing interval, and a cyclic per-photon basis schedule. The sender
then emits one photon every millisecond: message photons only on ticks at
whole multiples of the interval (counted from the start announcement), and
decoy photons of arbitrary polarization on every other tick, so the channel
is never silent. Only the schedule tells message photons' bases apart, so a
wiretapper without the key must guess.
"""

from __future__ import annotations

import random
from dataclasses import dataclass
from typing import Iterable, Optional

from .bb84 import BitString, hamming_distance
from .channels import Channel, InterceptResend, Party, QuantumChannelConfig
from .photon import Basis, Photon, Polarization, canonical_bases, encode, measure
from .seeding import derive_seed


class KeyTooShortError(ValueError):
    """The shared key has too few bits to derive session parameters."""


class ProtocolViolation(RuntimeError):
    """The observed classical announcements do not form a valid session."""


# Key bits 1-2 select the base pair. Both 00 and 11 select (R, D); the
# mapping is a fixed shared table, not a bijection.
BASE_PAIR_TABLE: dict[tuple[int, int], tuple[Basis, Basis]] = {
    (0, 0): (Basis.RECTILINEAR, Basis.DIAGONAL),
    (0, 1): (Basis.RECTILINEAR, Basis.CIRCULAR),
    (1, 0): (Basis.CIRCULAR, Basis.DIAGONAL),
    (1, 1): (Basis.RECTILINEAR, Basis.DIAGONAL),
}

# Timing rules mapping key bits 3-6 to the photon interval in ms.
TIMING_VALUE_PLUS_ONE = "table2"
TIMING_RAW_VALUE = "example9"
TIMING_RULES = (TIMING_VALUE_PLUS_ONE, TIMING_RAW_VALUE)


def select_bases(bit1: int, bit2: int) -> tuple[Basis, Basis]:
    """Map the first two key bits to the session's (base1, base2) pair."""
    if bit1 not in (0, 1) or bit2 not in (0, 1):
        raise ValueError(f"bits must be 0 or 1, got ({bit1!r}, {bit2!r})")
    return BASE_PAIR_TABLE[(bit1, bit2)]


def timing_interval(bits: Iterable[int], rule: str = TIMING_VALUE_PLUS_ONE) -> int:
    """Map four key bits to the photon timing interval in milliseconds.

    Rule "table2" reads the bits as a big-endian value plus one, covering
    1..16 ms. Rule "example9" reads the raw value (1001 -> 9 ms), covering
    1..15 ms; it rejects 0000, which would mean a degenerate 0 ms interval.
    """
    four = list(bits)
    if len(four) != 4 or any(b not in (0, 1) for b in four):
        raise ValueError(f"exactly four bits required, got {four!r}")
    value = (four[0] << 3) | (four[1] << 2) | (four[2] << 1) | four[3]
    if rule == TIMING_VALUE_PLUS_ONE:
        return value + 1
    if rule == TIMING_RAW_VALUE:
        if value == 0:
            raise ValueError("bits 0000 are invalid under rule 'example9'")
        return value
    raise ValueError(f"unknown timing rule {rule!r}; expected one of {TIMING_RULES}")


@dataclass(frozen=True)
class SessionParams:
    """Everything both parties derive from the shared key.

    schedule[k] is the basis of the k-th message photon (0-based here;
    schedule_basis exposes the protocol's 1-based, cyclic view).
    """

    base1: Basis
    base2: Basis
    interval_ms: int
    schedule: tuple[Basis, ...]

    def __post_init__(self) -> None:
        if self.base1 is self.base2:
            raise ValueError("base1 and base2 must differ")
        if self.interval_ms < 1:
            raise ValueError(f"interval_ms must be >= 1, got {self.interval_ms}")
        if not self.schedule:
            raise ValueError("schedule must be nonempty")
        allowed = {self.base1, self.base2}
        for basis in self.schedule:
            if basis not in allowed:
                raise ValueError(
                    f"schedule basis {basis} is neither base1 nor base2"
                )


def derive_session(
    key: BitString, timing_rule: str = TIMING_VALUE_PLUS_ONE
) -> SessionParams:
    """Derive the session parameters from a shared key of at least 7 bits.

    Bits 1-2 pick the base pair, bits 3-6 the timing interval, and every
    bit from 7 on contributes one schedule entry (0 -> base1, 1 -> base2).
    """
    if len(key) < 7:
        raise KeyTooShortError(
            f"need at least 7 key bits to derive session parameters, got {len(key)}"
        )
    base1, base2 = select_bases(key.bit(1), key.bit(2))
    interval = timing_interval(
        [key.bit(3), key.bit(4), key.bit(5), key.bit(6)], timing_rule
    )
    schedule = tuple(
        base2 if key.bit(i) else base1 for i in range(7, len(key) + 1)
    )
    return SessionParams(base1, base2, interval, schedule)


def schedule_basis(params: SessionParams, k: int) -> Basis:
    """Basis of the k-th message photon (1-based), cycling the schedule.

    When the message outlives the schedule the sequence wraps around to the
    first schedule entry; the bits that chose bases and timing are never
    reinterpreted as schedule entries.
    """
    if k < 1:
        raise ValueError(f"photon index must be >= 1, got {k}")
    return params.schedule[(k - 1) % len(params.schedule)]


_ALL_POLARIZATIONS = tuple(Polarization)


class BstsSender:
    """Tick-driven emitter: message photons on schedule, decoys elsewhere."""

    def __init__(
        self, message: BitString, params: SessionParams, rng: random.Random
    ) -> None:
        if len(message) == 0:
            raise ValueError("message must be nonempty")
        self._message = message
        self._params = params
        self._rng = rng
        self._next_k = 1

    @property
    def done(self) -> bool:
        return self._next_k > len(self._message)

    def emit(self, offset_ms: int, tag: int) -> tuple[Photon, bool]:
        """Produce the photon for one tick at the given session offset.

        Returns the photon and whether it carries a message bit. Decoy
        polarizations are uniform over all six states.
        """
        if offset_ms % self._params.interval_ms == 0:
            k = self._next_k
            bit = self._message.bit(k)
            basis = schedule_basis(self._params, k)
            self._next_k += 1
            return Photon(encode(bit, basis), tag=tag), True
        polarization = self._rng.choice(_ALL_POLARIZATIONS)
        return Photon(polarization, tag=tag), False


class BstsReceiver:
    """Tick-driven decoder: measures only the scheduled ticks."""

    def __init__(self, params: SessionParams, rng: random.Random) -> None:
        self._params = params
        self._rng = rng
        self._next_k = 1
        self._bits: list[int] = []

    def observe(self, offset_ms: int, photon: Photon, channel: Channel) -> None:
        """Handle one arriving photon at the given session offset.

        Off-schedule arrivals are ignored without measurement; scheduled
        ones are measured in the schedule's basis for that photon index.
        """
        if offset_ms % self._params.interval_ms != 0:
            return
        basis = schedule_basis(self._params, self._next_k)
        bit, _ = measure(photon, basis, self._rng)
        channel.trace.photon_measured(channel.now, photon.tag, basis, bit)
        self._bits.append(bit)
        self._next_k += 1

    def decoded(self) -> BitString:
        return BitString(self._bits)


def bsts_send(
    message: BitString,
    params: SessionParams,
    channel: Channel,
    rng: random.Random,
    receiver: Optional[BstsReceiver] = None,
) -> None:
    """Drive one transfer from the sending side, tick by tick.

    Announces the start mark, emits one photon per millisecond through the
    quantum path (message photons exactly at offsets divisible by
    interval_ms, decoys elsewhere), and announces the end mark right after
    the last message photon. With a receiver the arrivals are decoded as
    they happen; without one they queue on the channel for bsts_receive.
    """
    if len(message) == 0:
        raise ValueError("message must be nonempty")
    start = channel.now
    channel.send(Party.SENDER, "bsts_start", {"t_ms": start})
    sender = BstsSender(message, params, rng)
    while not sender.done:
        t = channel.tick()
        photon, real = sender.emit(t - start, tag=t)
        channel.trace.photon_sent(t, photon.tag, photon.polarization, real)
        photon = channel.transmit(photon)
        if receiver is not None:
            receiver.observe(t - start, photon, channel)
        else:
            channel.deliver(t, photon)
    channel.send(Party.SENDER, "bsts_end", {"t_ms": channel.now})


def bsts_receive(
    params: SessionParams, channel: Channel, rng: random.Random
) -> BitString:
    """Decode a queued transfer using the channel's recorded announcements.

    Reads the last start/end marks from the trace, measures the queued
    arrivals whose offsets from the start mark fall on the schedule, and
    returns the decoded bits. Raises ProtocolViolation when the marks are
    missing or out of order.
    """
    start: Optional[int] = None
    end: Optional[int] = None
    for event in channel.trace.events:
        if event["kind"] != "classical":
            continue
        if event["type"] == "bsts_start":
            start = event["body"]["t_ms"]
        elif event["type"] == "bsts_end":
            end = event["body"]["t_ms"]
    if start is None:
        raise ProtocolViolation("no start announcement observed")
    if end is None:
        raise ProtocolViolation("no end announcement observed")
    if end < start:
        raise ProtocolViolation(f"end mark {end} precedes start mark {start}")
    receiver = BstsReceiver(params, rng)
    for t, photon in channel.take_arrivals():
        if start < t <= end:
            receiver.observe(t - start, photon, channel)
    return receiver.decoded()


def bsts_transfer(
    message: BitString,
    params: SessionParams,
    channel: Channel,
    sender_rng: random.Random,
    receiver_rng: random.Random,
) -> BitString:
    """Run one interleaved transfer and return the receiver's decoding."""
    receiver = BstsReceiver(params, receiver_rng)
    bsts_send(message, params, channel, sender_rng, receiver=receiver)
    return receiver.decoded()


def simulate_bsts_eve(
    message: BitString,
    params: SessionParams,
    eve_basis_set: Optional[Iterable[Basis]],
    seed: int,
) -> tuple[float, float]:
    """Measure what an intercept-resend wiretapper learns from one transfer.

    Runs the transfer on a noiseless channel with the given eavesdropper
    (None disables her) and returns (eve_accuracy, receiver_error):
    the fraction of message bits Eve guessed right, and the fraction the
    legitimate receiver got wrong due to her disturbance. Without an
    eavesdropper eve_accuracy is 0.0 by convention.
    """
    if len(message) == 0:
        raise ValueError("message must be nonempty")
    eavesdropper = None
    if eve_basis_set is not None:
        bases = canonical_bases(eve_basis_set)
        if bases:
            eavesdropper = InterceptResend(bases)
    cfg = QuantumChannelConfig(noise_flip_prob=0.0, eavesdropper=eavesdropper)
    channel = Channel(cfg, random.Random(derive_seed(seed, "bsts.channel")))
    sender_rng = random.Random(derive_seed(seed, "bsts.sender"))
    receiver_rng = random.Random(derive_seed(seed, "bsts.receiver"))
    decoded = bsts_transfer(message, params, channel, sender_rng, receiver_rng)
    receiver_error = hamming_distance(decoded, message) / len(message)
    if eavesdropper is None:
        return 0.0, receiver_error
    eve_bits = {record.tag: record.bit for record in channel.eve_log}
    correct = 0
    for k in range(1, len(message) + 1):
        if eve_bits[k * params.interval_ms] == message.bit(k):
            correct += 1
    return correct / len(message), receiver_error
