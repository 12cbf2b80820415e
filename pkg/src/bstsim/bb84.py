"""BB84 key exchange: preparation, measurement, sifting, QBER, detection.

The sender encodes random bits in random bases; the receiver measures in
random bases of its own. Positions where the bases happened to match form
the sifted key. A disclosed random sample of the sifted key estimates the
error rate; a rate above threshold means the channel is not trusted.
"""

from __future__ import annotations

import random
from dataclasses import dataclass
from enum import Enum
from typing import Iterable, Optional, Sequence

from .channels import Channel, Party
from .photon import Basis, Photon, canonical_bases, encode, measure


class BitString:
    """An ordered bit sequence. Protocol positions are 1-based throughout."""

    __slots__ = ("bits",)

    def __init__(self, bits: Iterable[int] = ()) -> None:
        self.bits = [int(b) for b in bits]
        for b in self.bits:
            if b not in (0, 1):
                raise ValueError(f"bit must be 0 or 1, got {b!r}")

    @classmethod
    def from01(cls, text: str) -> "BitString":
        """Parse a string of '0'/'1' characters."""
        if any(ch not in "01" for ch in text):
            raise ValueError(f"not a bit string: {text!r}")
        return cls(int(ch) for ch in text)

    @classmethod
    def random(cls, n: int, rng: random.Random) -> "BitString":
        """Draw n independent uniform bits."""
        if n < 0:
            raise ValueError(f"length must be non-negative, got {n}")
        return cls(rng.getrandbits(1) for _ in range(n))

    def bit(self, position: int) -> int:
        """Return the bit at a 1-based position."""
        if not 1 <= position <= len(self.bits):
            raise ValueError(
                f"position {position} out of range 1..{len(self.bits)}"
            )
        return self.bits[position - 1]

    def to01(self) -> str:
        return "".join(str(b) for b in self.bits)

    def __len__(self) -> int:
        return len(self.bits)

    def __iter__(self):
        return iter(self.bits)

    def __eq__(self, other: object) -> bool:
        if isinstance(other, BitString):
            return self.bits == other.bits
        return NotImplemented

    def __hash__(self) -> int:
        return hash(tuple(self.bits))

    def __repr__(self) -> str:
        return f"BitString({self.to01()!r})"


def hamming_distance(a: BitString, b: BitString) -> int:
    """Number of positions where two equal-length bit strings differ."""
    if len(a) != len(b):
        raise ValueError(f"length mismatch: {len(a)} vs {len(b)}")
    return sum(x != y for x, y in zip(a.bits, b.bits))


# The key-exchange phase uses two conjugate bases by default; the circular
# basis joins only through explicit pool arguments.
DEFAULT_BASIS_POOL: tuple[Basis, ...] = (Basis.RECTILINEAR, Basis.DIAGONAL)


def sender_prepare(
    n: int,
    rng: random.Random,
    basis_pool: Sequence[Basis] = DEFAULT_BASIS_POOL,
) -> tuple[BitString, list[Basis], list[Photon]]:
    """Draw n random bits and bases and encode one photon per position.

    Photon tags are the 1-based positions. Per position the rng draws the
    bit first, then the basis.
    """
    if n < 1:
        raise ValueError(f"photon count must be >= 1, got {n}")
    pool = canonical_bases(basis_pool)
    bits: list[int] = []
    bases: list[Basis] = []
    photons: list[Photon] = []
    for i in range(1, n + 1):
        bit = rng.getrandbits(1)
        basis = rng.choice(pool)
        bits.append(bit)
        bases.append(basis)
        photons.append(Photon(encode(bit, basis), tag=i))
    return BitString(bits), bases, photons


def receiver_measure(
    photons: Sequence[Photon],
    rng: random.Random,
    basis_pool: Sequence[Basis] = DEFAULT_BASIS_POOL,
) -> tuple[list[Basis], BitString]:
    """Measure each photon in an independently random basis from the pool."""
    if not photons:
        raise ValueError("no photons to measure")
    pool = canonical_bases(basis_pool)
    bases: list[Basis] = []
    bits: list[int] = []
    for photon in photons:
        basis = rng.choice(pool)
        bit, _ = measure(photon, basis, rng)
        bases.append(basis)
        bits.append(bit)
    return bases, BitString(bits)


@dataclass
class SiftResult:
    """Keys restricted to the basis-matched positions.

    kept_indices are the original 1-based photon positions that survived.
    """

    kept_indices: list[int]
    sender_key: BitString
    receiver_key: BitString

    def __len__(self) -> int:
        return len(self.kept_indices)


def sift(
    sender_bits: BitString,
    sender_bases: Sequence[Basis],
    receiver_bases: Sequence[Basis],
    receiver_bits: BitString,
    channel: Optional[Channel] = None,
) -> SiftResult:
    """Keep only the positions where sender and receiver bases match.

    When a channel is given, the basis comparison happens publicly: the
    receiver reveals its basis string, the sender answers with the list of
    agreed positions.
    """
    n = len(sender_bits)
    if not (len(sender_bases) == len(receiver_bases) == len(receiver_bits) == n):
        raise ValueError(
            "bits and bases must all have equal length, got "
            f"{n}/{len(sender_bases)}/{len(receiver_bases)}/{len(receiver_bits)}"
        )
    kept = [
        i + 1 for i in range(n) if sender_bases[i] is receiver_bases[i]
    ]
    if channel is not None:
        channel.send(
            Party.RECEIVER,
            "basis_reveal",
            {"bases": "".join(b.value for b in receiver_bases)},
        )
        channel.send(Party.SENDER, "basis_agree", {"positions": list(kept)})
    sender_key = BitString(sender_bits.bits[i - 1] for i in kept)
    receiver_key = BitString(receiver_bits.bits[i - 1] for i in kept)
    return SiftResult(kept, sender_key, receiver_key)


def estimate_qber(
    sifted: SiftResult,
    sample_size: int,
    channel: Channel,
    rng: random.Random,
) -> tuple[float, SiftResult]:
    """Publicly compare a random sample of the sifted key and burn it.

    Both parties disclose their bits at sample_size randomly chosen sifted
    positions; the observed disagreement fraction estimates the channel
    error rate. Disclosed positions are removed from both keys, so the
    returned SiftResult is sample_size shorter.
    """
    m = len(sifted)
    if sample_size < 0:
        raise ValueError(f"sample_size must be >= 0, got {sample_size}")
    if sample_size > m:
        raise ValueError(f"sample_size {sample_size} exceeds sifted length {m}")
    if sample_size == 0:
        return 0.0, sifted
    chosen = sorted(rng.sample(range(m), sample_size))
    positions = [sifted.kept_indices[j] for j in chosen]
    sender_pairs = [[p, sifted.sender_key.bits[j]] for p, j in zip(positions, chosen)]
    receiver_pairs = [
        [p, sifted.receiver_key.bits[j]] for p, j in zip(positions, chosen)
    ]
    channel.send(Party.SENDER, "qber_sample", {"pairs": sender_pairs})
    channel.send(Party.RECEIVER, "qber_sample", {"pairs": receiver_pairs})
    disagreements = sum(
        1 for (_, a), (_, b) in zip(sender_pairs, receiver_pairs) if a != b
    )
    qber = disagreements / sample_size
    for position in positions:
        channel.trace.discard(channel.now, position)
    chosen_set = set(chosen)
    kept = [p for j, p in enumerate(sifted.kept_indices) if j not in chosen_set]
    sender_key = BitString(
        b for j, b in enumerate(sifted.sender_key.bits) if j not in chosen_set
    )
    receiver_key = BitString(
        b for j, b in enumerate(sifted.receiver_key.bits) if j not in chosen_set
    )
    return qber, SiftResult(kept, sender_key, receiver_key)


class Decision(Enum):
    """Outcome of the eavesdropper check."""

    PROCEED = "Proceed"
    ABORT = "Abort"

    def __str__(self) -> str:
        return self.value


def detect_eve(
    qber: float, threshold: float, channel: Optional[Channel] = None
) -> Decision:
    """Abort when the estimated error rate strictly exceeds the threshold.

    A rate exactly at the threshold proceeds. When a channel is given the
    decision is recorded in its trace.
    """
    if not 0.0 <= qber <= 1.0:
        raise ValueError(f"qber must be in [0, 1], got {qber!r}")
    if not 0.0 <= threshold <= 1.0:
        raise ValueError(f"threshold must be in [0, 1], got {threshold!r}")
    decision = Decision.ABORT if qber > threshold else Decision.PROCEED
    if channel is not None:
        channel.trace.decision(channel.now, "eve_check", decision.value)
    return decision


def exchange(
    n: int,
    channel: Channel,
    sender_rng: random.Random,
    receiver_rng: random.Random,
    basis_pool: Sequence[Basis] = DEFAULT_BASIS_POOL,
) -> tuple[BitString, list[Basis], list[Basis], BitString]:
    """Run the photon phase tick by tick over a channel.

    Each millisecond one photon is prepared, transmitted (through any
    eavesdropper and noise), and measured on arrival. Returns the sender
    bits, sender bases, receiver bases, and receiver bits.
    """
    if n < 1:
        raise ValueError(f"photon count must be >= 1, got {n}")
    pool = canonical_bases(basis_pool)
    sender_bits: list[int] = []
    sender_bases: list[Basis] = []
    receiver_bases: list[Basis] = []
    receiver_bits: list[int] = []
    trace = channel.trace
    for i in range(1, n + 1):
        t = channel.tick()
        bit = sender_rng.getrandbits(1)
        basis = sender_rng.choice(pool)
        photon = Photon(encode(bit, basis), tag=i)
        trace.photon_sent(t, i, photon.polarization, real=True)
        photon = channel.transmit(photon)
        rbasis = receiver_rng.choice(pool)
        rbit, _ = measure(photon, rbasis, receiver_rng)
        trace.photon_measured(t, i, rbasis, rbit)
        sender_bits.append(bit)
        sender_bases.append(basis)
        receiver_bases.append(rbasis)
        receiver_bits.append(rbit)
    return (
        BitString(sender_bits),
        sender_bases,
        receiver_bases,
        BitString(receiver_bits),
    )
