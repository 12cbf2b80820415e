"""Key post-processing: interactive error reconciliation, then amplification.

Reconciliation runs repeated passes over a shared random permutation of the
keys, comparing block parities in public and binary-searching each mismatch
down to one position, which both sides discard. Every parity crossing the
classical channel is counted as leakage; privacy amplification then shrinks
the key by at least that count.
"""

from __future__ import annotations

import random
from dataclasses import dataclass
from typing import Sequence

from .bb84 import BitString
from .channels import Channel, Party

# Extra margin discarded on top of the counted parity leakage.
AMPLIFY_SAFETY_BITS = 16


@dataclass(frozen=True)
class ReconciliationParams:
    """Tuning knobs for the parity-bisection reconciliation loop."""

    initial_block_size: int = 16
    passes_without_error_to_stop: int = 2
    max_passes: int = 32

    def __post_init__(self) -> None:
        if self.initial_block_size < 1:
            raise ValueError(
                f"initial_block_size must be >= 1, got {self.initial_block_size}"
            )
        if self.passes_without_error_to_stop < 1:
            raise ValueError(
                "passes_without_error_to_stop must be >= 1, got "
                f"{self.passes_without_error_to_stop}"
            )
        if self.max_passes < self.passes_without_error_to_stop:
            raise ValueError(
                f"max_passes must be >= passes_without_error_to_stop, got "
                f"{self.max_passes} < {self.passes_without_error_to_stop}"
            )


@dataclass
class ReconciliationResult:
    """Outcome of one reconciliation run.

    discarded_positions holds original 1-based key positions removed by
    bisection; leaked_parity_count is the number of parity values that
    crossed the classical channel.
    """

    key_a: BitString
    key_b: BitString
    discarded_positions: set[int]
    leaked_parity_count: int
    passes_run: int


def block_parity(bits: BitString, lo: int, hi: int) -> int:
    """XOR of the bits at 1-based positions lo..hi inclusive."""
    n = len(bits)
    if not 1 <= lo <= hi <= n:
        raise ValueError(f"block [{lo}, {hi}] out of range 1..{n}")
    parity = 0
    for b in bits.bits[lo - 1 : hi]:
        parity ^= b
    return parity


def _bisect_error(
    a: BitString,
    b: BitString,
    lo: int,
    hi: int,
    channel: Channel,
    pass_num: int,
) -> tuple[int, int]:
    """Locate one differing position in a block of known-unequal parity.

    Each halving step publishes both sides' parities of the left half.
    Returns (position, parity_messages_sent).
    """
    if block_parity(a, lo, hi) == block_parity(b, lo, hi):
        raise ValueError(f"block [{lo}, {hi}] parities agree; nothing to locate")
    sent = 0
    while lo < hi:
        mid = (lo + hi) // 2
        pa = block_parity(a, lo, mid)
        pb = block_parity(b, lo, mid)
        channel.send(
            Party.SENDER,
            "parity",
            {"pass": pass_num, "block_lo": lo, "block_hi": mid, "parity": pa},
        )
        channel.send(
            Party.RECEIVER,
            "parity",
            {"pass": pass_num, "block_lo": lo, "block_hi": mid, "parity": pb},
        )
        sent += 2
        if pa != pb:
            hi = mid
        else:
            lo = mid + 1
    return lo, sent


def bisect_error(
    a: BitString,
    b: BitString,
    lo: int,
    hi: int,
    channel: Channel,
    pass_num: int = 0,
) -> int:
    """Public binary search for one differing position within a block.

    Precondition: the block's parities differ between a and b. The returned
    1-based position is guaranteed to hold unequal bits.
    """
    position, _ = _bisect_error(a, b, lo, hi, channel, pass_num)
    return position


def _apply_order(values: list, order: Sequence[int]) -> list:
    return [values[j] for j in order]


def reconcile(
    a: BitString,
    b: BitString,
    params: ReconciliationParams,
    channel: Channel,
    shared_rng: random.Random,
) -> ReconciliationResult:
    """Interactively remove the differences between two keys.

    Each pass announces a fresh permutation seed, shuffles both keys the
    same way, compares constant-size block parities, and discards one
    located position per mismatched block (from both keys, so they stay
    aligned). The loop stops after passes_without_error_to_stop consecutive
    clean passes, or at max_passes. Outputs are returned in original order;
    bit values are never altered, only removed.
    """
    if len(a) != len(b):
        raise ValueError(f"length mismatch: {len(a)} vs {len(b)}")
    n = len(a)
    if n < 1:
        raise ValueError("keys must be nonempty")
    if params.initial_block_size > n:
        raise ValueError(
            f"initial_block_size {params.initial_block_size} exceeds key length {n}"
        )
    work_a = list(a.bits)
    work_b = list(b.bits)
    origin = list(range(1, n + 1))
    discarded: set[int] = set()
    leaked = 0
    clean_streak = 0
    passes_run = 0
    for pass_num in range(1, params.max_passes + 1):
        passes_run = pass_num
        perm_seed = shared_rng.getrandbits(32)
        channel.send(
            Party.SENDER, "perm_seed", {"pass": pass_num, "seed": perm_seed}
        )
        order = list(range(len(work_a)))
        random.Random(perm_seed).shuffle(order)
        work_a = _apply_order(work_a, order)
        work_b = _apply_order(work_b, order)
        origin = _apply_order(origin, order)
        view_a = BitString(work_a)
        view_b = BitString(work_b)
        m = len(work_a)
        to_remove: list[int] = []
        for lo in range(1, m + 1, params.initial_block_size):
            hi = min(m, lo + params.initial_block_size - 1)
            pa = block_parity(view_a, lo, hi)
            pb = block_parity(view_b, lo, hi)
            channel.send(
                Party.SENDER,
                "parity",
                {"pass": pass_num, "block_lo": lo, "block_hi": hi, "parity": pa},
            )
            channel.send(
                Party.RECEIVER,
                "parity",
                {"pass": pass_num, "block_lo": lo, "block_hi": hi, "parity": pb},
            )
            leaked += 2
            if pa != pb:
                position, sent = _bisect_error(
                    view_a, view_b, lo, hi, channel, pass_num
                )
                leaked += sent
                original = origin[position - 1]
                channel.send(Party.SENDER, "discard", {"position": original})
                channel.trace.discard(channel.now, original)
                discarded.add(original)
                to_remove.append(position - 1)
        if to_remove:
            clean_streak = 0
            removed = set(to_remove)
            work_a = [x for j, x in enumerate(work_a) if j not in removed]
            work_b = [x for j, x in enumerate(work_b) if j not in removed]
            origin = [x for j, x in enumerate(origin) if j not in removed]
        else:
            clean_streak += 1
            if clean_streak >= params.passes_without_error_to_stop:
                break
    restored = sorted(zip(origin, work_a, work_b))
    key_a = BitString(x for _, x, _ in restored)
    key_b = BitString(x for _, _, x in restored)
    return ReconciliationResult(key_a, key_b, discarded, leaked, passes_run)


def privacy_amplify(
    key: BitString, discard_count: int, shared_rng: random.Random
) -> BitString:
    """Shrink a key by a shared-seed permutation then dropping a prefix.

    Both parties call this with the same seed and equal keys, so they end
    with identical shorter keys. discard_count may not exceed the key
    length; discarding everything yields the empty key.
    """
    if discard_count < 0:
        raise ValueError(f"discard_count must be >= 0, got {discard_count}")
    if discard_count > len(key):
        raise ValueError(
            f"discard_count {discard_count} exceeds key length {len(key)}"
        )
    order = list(range(len(key)))
    shared_rng.shuffle(order)
    permuted = [key.bits[j] for j in order]
    return BitString(permuted[discard_count:])
