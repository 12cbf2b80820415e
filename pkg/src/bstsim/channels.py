"""Quantum and classical channels, the millisecond clock, and the session trace.

Everything observable in a session flows through one Channel object: photon
transmissions (where the eavesdropper and channel noise act), classical
messages (all public, all visible to the eavesdropper), and the event trace.
"""

from __future__ import annotations

import random
from dataclasses import dataclass, field
from enum import Enum
from typing import Any, Iterable, Optional

from .photon import (
    Basis,
    Photon,
    Polarization,
    basis_of,
    bit_of,
    canonical_bases,
    encode,
    measure,
)


class Party(Enum):
    """Endpoint identity stamped on classical messages."""

    SENDER = "sender"
    RECEIVER = "receiver"

    def __str__(self) -> str:
        return self.value


@dataclass(slots=True)
class Clock:
    """Millisecond session clock, advanced in whole 1 ms ticks."""

    now_ms: int = 0


def tick(clock: Clock) -> Clock:
    """Advance the clock by one millisecond."""
    clock.now_ms += 1
    return clock


@dataclass(slots=True)
class ClassicalMessage:
    """One message on the public classical channel.

    Delivery is assumed reliable and authenticated: the receiver gets an
    identical record, and so does any eavesdropper.
    """

    sender: Party
    type: str
    body: dict
    t_ms: int = 0


class SessionTrace:
    """Append-only event log of one protocol session.

    Events are dicts with at least ``t_ms`` and ``kind``. Reads return the
    events in non-decreasing ``t_ms`` order (a stable sort applied lazily,
    so interleaved real-time appends cost nothing extra).
    """

    def __init__(self) -> None:
        self._events: list[dict[str, Any]] = []
        self._last_t = 0
        self._needs_sort = False

    def add(self, t_ms: int, kind: str, **detail: Any) -> None:
        """Record one event at the given timestamp."""
        event = {"t_ms": t_ms, "kind": kind}
        event.update(detail)
        if t_ms < self._last_t:
            self._needs_sort = True
        else:
            self._last_t = t_ms
        self._events.append(event)

    @property
    def events(self) -> list[dict[str, Any]]:
        if self._needs_sort:
            self._events.sort(key=lambda e: e["t_ms"])
            self._needs_sort = False
        return self._events

    def __len__(self) -> int:
        return len(self._events)

    # Typed appenders keep field names consistent across the codebase.

    def photon_sent(
        self, t_ms: int, tag: int, polarization: Polarization, real: bool
    ) -> None:
        self.add(
            t_ms,
            "photon_sent",
            tag=tag,
            polarization=polarization.value,
            real=real,
        )

    def photon_measured(self, t_ms: int, tag: int, basis: Basis, bit: int) -> None:
        self.add(t_ms, "photon_measured", tag=tag, basis=basis.value, bit=bit)

    def classical(self, message: ClassicalMessage) -> None:
        self.add(
            message.t_ms,
            "classical",
            **{"from": message.sender.value},
            type=message.type,
            body=message.body,
        )

    def discard(self, t_ms: int, position: int) -> None:
        self.add(t_ms, "discard", position=position)

    def decision(self, t_ms: int, name: str, value: str) -> None:
        self.add(t_ms, "decision", name=name, value=value)

    def count(
        self, kind: Optional[str] = None, message_type: Optional[str] = None
    ) -> int:
        """Count events, optionally filtered by kind and classical type."""
        total = 0
        for event in self._events:
            if kind is not None and event["kind"] != kind:
                continue
            if message_type is not None and event.get("type") != message_type:
                continue
            total += 1
        return total

    def to_dict(self) -> dict[str, Any]:
        return {"events": list(self.events)}

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> "SessionTrace":
        if not isinstance(data, dict) or "events" not in data:
            raise ValueError("trace document must be an object with an 'events' list")
        events = data["events"]
        if not isinstance(events, list):
            raise ValueError("'events' must be a list")
        trace = cls()
        for event in events:
            if not isinstance(event, dict) or "t_ms" not in event or "kind" not in event:
                raise ValueError(f"malformed trace event: {event!r}")
            rest = {k: v for k, v in event.items() if k not in ("t_ms", "kind")}
            trace.add(event["t_ms"], event["kind"], **rest)
        return trace


@dataclass(frozen=True)
class InterceptResend:
    """Intercept-resend eavesdropper configuration.

    Eve measures every photon in a basis drawn uniformly from basis_set and
    forwards the collapsed photon. She cannot delay, drop, or inject photons.
    """

    basis_set: tuple[Basis, ...]

    def __post_init__(self) -> None:
        normalized = canonical_bases(self.basis_set)
        if not normalized:
            raise ValueError("eavesdropper basis_set must be nonempty")
        object.__setattr__(self, "basis_set", normalized)


@dataclass(frozen=True)
class QuantumChannelConfig:
    """Per-photon channel effects: optional eavesdropper, then noise.

    noise_flip_prob is the probability that a transmitted photon's bit is
    flipped within its current basis (the polarization moves to the
    orthogonal state of the same basis).
    """

    noise_flip_prob: float = 0.0
    eavesdropper: Optional[InterceptResend] = None

    def __post_init__(self) -> None:
        if not 0.0 <= self.noise_flip_prob <= 1.0:
            raise ValueError(
                f"noise_flip_prob must be in [0, 1], got {self.noise_flip_prob!r}"
            )


@dataclass(slots=True)
class EveRecord:
    """What the eavesdropper wrote down for one intercepted photon."""

    tag: int
    basis: Basis
    bit: int


def eve_intercept(
    photon: Photon, basis_set: Iterable[Basis], rng: random.Random
) -> tuple[Photon, int, Basis]:
    """Measure a photon in a random basis from basis_set and pass it on.

    Returns the forwarded photon (collapsed in place), the bit Eve observed,
    and the basis she used. With a matching basis the interception is
    invisible; otherwise the forwarded state is freshly polarized in Eve's
    basis.
    """
    bases = canonical_bases(basis_set)
    if not bases:
        raise ValueError("basis_set must be nonempty")
    basis = bases[0] if len(bases) == 1 else rng.choice(bases)
    bit, _ = measure(photon, basis, rng)
    return photon, bit, basis


def transmit_quantum(
    photon: Photon,
    cfg: QuantumChannelConfig,
    rng: random.Random,
    eve_log: Optional[list[EveRecord]] = None,
) -> Photon:
    """Push one photon through the quantum channel.

    The eavesdropper (if configured) acts first, then basis-preserving
    noise. Interception results are appended to eve_log when given.
    """
    if cfg.eavesdropper is not None:
        photon, ebit, ebasis = eve_intercept(photon, cfg.eavesdropper.basis_set, rng)
        if eve_log is not None:
            eve_log.append(EveRecord(photon.tag, ebasis, ebit))
    if cfg.noise_flip_prob > 0.0 and rng.random() < cfg.noise_flip_prob:
        basis = basis_of(photon.polarization)
        photon.polarization = encode(1 - bit_of(photon.polarization), basis)
    return photon


def send_classical(
    message: ClassicalMessage,
    trace: Optional[SessionTrace] = None,
    eve_view: Optional[list[ClassicalMessage]] = None,
) -> ClassicalMessage:
    """Deliver a classical message: record it and expose it to Eve."""
    if trace is not None:
        trace.classical(message)
    if eve_view is not None:
        eve_view.append(message)
    return message


class Channel:
    """The shared session medium: clock, trace, quantum path, classical path.

    One Channel carries one protocol phase (or a whole session when phases
    share the clock and trace). Photon transmissions consume this channel's
    rng, so two channels with equal configs and seeds behave identically.
    """

    def __init__(
        self,
        cfg: QuantumChannelConfig,
        rng: random.Random,
        clock: Optional[Clock] = None,
        trace: Optional[SessionTrace] = None,
    ) -> None:
        self.cfg = cfg
        self.rng = rng
        self.clock = clock if clock is not None else Clock()
        self.trace = trace if trace is not None else SessionTrace()
        self.eve_log: list[EveRecord] = []
        self.eve_view: list[ClassicalMessage] = []
        self.arrivals: list[tuple[int, Photon]] = []

    @property
    def now(self) -> int:
        return self.clock.now_ms

    def tick(self) -> int:
        """Advance the session clock one millisecond; return the new time."""
        tick(self.clock)
        return self.clock.now_ms

    def transmit(self, photon: Photon) -> Photon:
        """Send one photon through the quantum path (Eve, then noise)."""
        return transmit_quantum(photon, self.cfg, self.rng, self.eve_log)

    def send(self, sender: Party, type: str, body: dict) -> ClassicalMessage:
        """Send a classical message stamped with the current time."""
        message = ClassicalMessage(sender, type, body, t_ms=self.now)
        return send_classical(message, self.trace, self.eve_view)

    def deliver(self, t_ms: int, photon: Photon) -> None:
        """Queue a transmitted photon for a later receiving pass."""
        self.arrivals.append((t_ms, photon))

    def take_arrivals(self) -> list[tuple[int, Photon]]:
        """Drain and return the queued photon arrivals in order."""
        taken = self.arrivals
        self.arrivals = []
        return taken
