"""Photon polarization states, bit encoding, and basis-dependent measurement.

Three polarization bases are modeled, each with two orthogonal states.
Any two distinct bases act as conjugate pairs: measuring a photon in a
basis other than the one it was prepared in yields a uniformly random bit
and destroys the original state.
"""

from __future__ import annotations

import random
from dataclasses import dataclass
from enum import Enum
from typing import Iterable


class Basis(Enum):
    """A polarization basis, named by its single-letter wire form."""

    RECTILINEAR = "R"
    DIAGONAL = "D"
    CIRCULAR = "C"

    def __str__(self) -> str:
        return self.value


class Polarization(Enum):
    """The six photon polarization states, two per basis."""

    DEG0 = "0deg"
    DEG90 = "90deg"
    DEG45 = "45deg"
    DEG135 = "135deg"
    SPIN_L = "spinL"
    SPIN_R = "spinR"

    def __str__(self) -> str:
        return self.value


# Within each basis the first-listed orientation carries bit 0.
_ENCODE: dict[tuple[int, Basis], Polarization] = {
    (0, Basis.RECTILINEAR): Polarization.DEG0,
    (1, Basis.RECTILINEAR): Polarization.DEG90,
    (0, Basis.DIAGONAL): Polarization.DEG45,
    (1, Basis.DIAGONAL): Polarization.DEG135,
    (0, Basis.CIRCULAR): Polarization.SPIN_L,
    (1, Basis.CIRCULAR): Polarization.SPIN_R,
}

_OWNER: dict[Polarization, tuple[Basis, int]] = {
    pol: (basis, bit) for (bit, basis), pol in _ENCODE.items()
}

# Canonical basis ordering, used wherever a set of bases must be iterated
# deterministically (eavesdropper basis choice, pool sampling).
CANONICAL_BASES: tuple[Basis, ...] = (
    Basis.RECTILINEAR,
    Basis.DIAGONAL,
    Basis.CIRCULAR,
)

_BASIS_RANK = {basis: i for i, basis in enumerate(CANONICAL_BASES)}


def canonical_bases(bases: Iterable[Basis]) -> tuple[Basis, ...]:
    """Deduplicate a collection of bases into canonical (R, D, C) order."""
    unique = set(bases)
    bad = [b for b in unique if not isinstance(b, Basis)]
    if bad:
        raise ValueError(f"not a basis: {bad[0]!r}")
    return tuple(sorted(unique, key=_BASIS_RANK.__getitem__))


@dataclass(slots=True)
class Photon:
    """A single photon carrying one polarization state.

    The tag is an opaque sequence number used only for trace bookkeeping;
    it never influences measurement.
    """

    polarization: Polarization
    tag: int = 0


def basis_of(polarization: Polarization) -> Basis:
    """Return the basis a polarization state belongs to."""
    return _OWNER[polarization][0]


def bit_of(polarization: Polarization) -> int:
    """Return the bit a polarization state encodes within its own basis."""
    return _OWNER[polarization][1]


def encode(bit: int, basis: Basis) -> Polarization:
    """Map a bit to the polarization state of the given basis carrying it."""
    if bit not in (0, 1):
        raise ValueError(f"bit must be 0 or 1, got {bit!r}")
    if not isinstance(basis, Basis):
        raise ValueError(f"not a basis: {basis!r}")
    return _ENCODE[(bit, basis)]


def measure(
    photon: Photon, basis: Basis, rng: random.Random
) -> tuple[int, Polarization]:
    """Measure a photon in the given basis, collapsing its state.

    A matching-basis measurement reads the encoded bit exactly and leaves
    the polarization unchanged; the rng is not consumed. A mismatched-basis
    measurement yields a uniformly random bit and re-polarizes the photon
    in the measurement basis, so the prepared state is unrecoverable
    afterwards. Returns the observed bit and the post-measurement state.
    """
    owner, bit = _OWNER[photon.polarization]
    if owner is basis:
        return bit, photon.polarization
    bit = rng.getrandbits(1)
    collapsed = _ENCODE[(bit, basis)]
    photon.polarization = collapsed
    return bit, collapsed
