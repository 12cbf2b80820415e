"""End-to-end sessions: key exchange, post-processing, then message transfer.

A session runs BB84 over a configured channel, estimates the error rate,
aborts if it exceeds the threshold, reconciles the surviving keys, optionally
amplifies, derives transfer parameters from the resulting shared key, and
moves a message through the schedule-synchronized photon stream. One clock
and one trace span all phases.
"""

from __future__ import annotations

import json
import math
import random
import statistics
from dataclasses import dataclass, field, replace
from typing import Any, Optional

from . import bb84
from .bb84 import BitString, Decision, hamming_distance
from .bsts import (
    TIMING_RULES,
    KeyTooShortError,
    bsts_transfer,
    derive_session,
)
from .channels import (
    Channel,
    Clock,
    EveRecord,
    InterceptResend,
    Party,
    QuantumChannelConfig,
    SessionTrace,
)
from .photon import Basis, canonical_bases
from .postprocess import (
    AMPLIFY_SAFETY_BITS,
    ReconciliationParams,
    block_parity,
    privacy_amplify,
    reconcile,
)
from .seeding import derive_seed

EVE_MODE_NONE = "none"
EVE_MODE_INTERCEPT_RESEND = "intercept_resend"
EVE_MODES = (EVE_MODE_NONE, EVE_MODE_INTERCEPT_RESEND)


class InvalidConfigError(ValueError):
    """The session configuration cannot be run."""


class ReconciliationFailure(Exception):
    """The reconciled keys still disagree on full-string parity.

    Carries the partial report and the trace accumulated so far.
    """

    def __init__(self, report: "SessionReport", trace: SessionTrace) -> None:
        super().__init__("reconciled keys fail the final parity check")
        self.report = report
        self.trace = trace


@dataclass
class SessionConfig:
    """Inputs of one full session. All randomness derives from seed."""

    photons: int = 4096
    noise_flip_prob: float = 0.0
    eve_mode: str = EVE_MODE_NONE
    eve_basis_set: tuple[Basis, ...] = (Basis.RECTILINEAR, Basis.DIAGONAL)
    seed: int = 0
    sample_size: int = 200
    qber_threshold: float = 0.11
    timing_rule: str = "table2"
    message: Optional[BitString] = None
    message_bits: int = 64
    recon: ReconciliationParams = field(default_factory=ReconciliationParams)
    amplify: bool = False

    def validate(self) -> None:
        if self.photons < 1:
            raise InvalidConfigError(f"photons must be >= 1, got {self.photons}")
        if not 0.0 <= self.noise_flip_prob <= 1.0:
            raise InvalidConfigError(
                f"noise_flip_prob must be in [0, 1], got {self.noise_flip_prob}"
            )
        if self.eve_mode not in EVE_MODES:
            raise InvalidConfigError(
                f"eve_mode must be one of {EVE_MODES}, got {self.eve_mode!r}"
            )
        try:
            bases = canonical_bases(self.eve_basis_set)
        except ValueError as exc:
            raise InvalidConfigError(str(exc)) from exc
        if self.eve_mode == EVE_MODE_INTERCEPT_RESEND and not bases:
            raise InvalidConfigError("eve_basis_set must be nonempty")
        if self.sample_size < 0:
            raise InvalidConfigError(
                f"sample_size must be >= 0, got {self.sample_size}"
            )
        if self.photons < self.sample_size + 7:
            raise InvalidConfigError(
                f"photons must be >= sample_size + 7 so a usable key can "
                f"survive sampling, got {self.photons} < {self.sample_size + 7}"
            )
        if not 0.0 <= self.qber_threshold <= 1.0:
            raise InvalidConfigError(
                f"qber_threshold must be in [0, 1], got {self.qber_threshold}"
            )
        if self.timing_rule not in TIMING_RULES:
            raise InvalidConfigError(
                f"timing_rule must be one of {TIMING_RULES}, got {self.timing_rule!r}"
            )
        if self.message is not None and len(self.message) == 0:
            raise InvalidConfigError("message must be nonempty when given")
        if self.message is None and self.message_bits < 1:
            raise InvalidConfigError(
                f"message_bits must be >= 1, got {self.message_bits}"
            )


@dataclass
class SessionReport:
    """Outputs of one session. Fields not reached (abort) stay None."""

    sifted_len: int
    qber: float
    eve_decision: str
    reconciled_len: Optional[int] = None
    leaked_parity_count: Optional[int] = None
    amplified_len: Optional[int] = None
    bsts_interval_ms: Optional[int] = None
    bsts_bases: Optional[list[str]] = None
    message_delivered: bool = False
    receiver_error: Optional[float] = None
    eve_accuracy: Optional[float] = None

    def to_dict(self) -> dict[str, Any]:
        return {
            "sifted_len": self.sifted_len,
            "qber": self.qber,
            "eve_decision": self.eve_decision,
            "reconciled_len": self.reconciled_len,
            "leaked_parity_count": self.leaked_parity_count,
            "amplified_len": self.amplified_len,
            "bsts_interval_ms": self.bsts_interval_ms,
            "bsts_bases": self.bsts_bases,
            "message_delivered": self.message_delivered,
            "receiver_error": self.receiver_error,
            "eve_accuracy": self.eve_accuracy,
        }


def _quantum_config(cfg: SessionConfig) -> QuantumChannelConfig:
    eavesdropper = None
    if cfg.eve_mode == EVE_MODE_INTERCEPT_RESEND:
        eavesdropper = InterceptResend(canonical_bases(cfg.eve_basis_set))
    return QuantumChannelConfig(
        noise_flip_prob=cfg.noise_flip_prob, eavesdropper=eavesdropper
    )


@dataclass
class _Bb84Stage:
    """Intermediate state after exchange, sifting, sampling, and detection."""

    sifted_len: int
    qber: float
    decision: Decision
    remaining: bb84.SiftResult
    channel: Channel
    clock: Clock
    trace: SessionTrace


def _run_bb84_stage(cfg: SessionConfig) -> _Bb84Stage:
    clock = Clock()
    trace = SessionTrace()
    channel = Channel(
        _quantum_config(cfg),
        random.Random(derive_seed(cfg.seed, "bb84.channel")),
        clock,
        trace,
    )
    sender_rng = random.Random(derive_seed(cfg.seed, "bb84.sender"))
    receiver_rng = random.Random(derive_seed(cfg.seed, "bb84.receiver"))
    bits, bases, rbases, rbits = bb84.exchange(
        cfg.photons, channel, sender_rng, receiver_rng
    )
    sifted = bb84.sift(bits, bases, rbases, rbits, channel)
    sample_rng = random.Random(derive_seed(cfg.seed, "bb84.sample"))
    sample = min(cfg.sample_size, len(sifted))
    qber, remaining = bb84.estimate_qber(sifted, sample, channel, sample_rng)
    decision = bb84.detect_eve(qber, cfg.qber_threshold, channel)
    return _Bb84Stage(len(sifted), qber, decision, remaining, channel, clock, trace)


def _eve_accuracy(
    eve_log: list[EveRecord],
    message: BitString,
    interval_ms: int,
    start_ms: int,
) -> Optional[float]:
    """Fraction of message bits the wiretapper's log got right."""
    if not eve_log:
        return None
    bits = {record.tag: record.bit for record in eve_log}
    correct = 0
    for k in range(1, len(message) + 1):
        if bits.get(start_ms + k * interval_ms) == message.bit(k):
            correct += 1
    return correct / len(message)


def run_full_session(cfg: SessionConfig) -> tuple[SessionReport, SessionTrace]:
    """Run one complete session and return its report and trace.

    An estimated error rate above threshold aborts after detection: the
    report carries the exchange results and eve_decision "Abort", with the
    downstream fields unset. A final parity mismatch after reconciliation
    raises ReconciliationFailure carrying the partial report and trace.
    """
    cfg.validate()
    stage = _run_bb84_stage(cfg)
    channel = stage.channel
    report = SessionReport(
        sifted_len=stage.sifted_len,
        qber=stage.qber,
        eve_decision=stage.decision.value,
    )
    if stage.decision is Decision.ABORT:
        return report, stage.trace

    remaining = stage.remaining
    if len(remaining) < 1:
        raise InvalidConfigError("no key bits survive the disclosed sample")
    recon_params = cfg.recon
    if recon_params.initial_block_size > len(remaining):
        recon_params = replace(
            recon_params, initial_block_size=len(remaining)
        )
    recon_rng = random.Random(derive_seed(cfg.seed, "recon.perm"))
    result = reconcile(
        remaining.sender_key, remaining.receiver_key, recon_params, channel, recon_rng
    )
    report.reconciled_len = len(result.key_a)
    report.leaked_parity_count = result.leaked_parity_count

    # Final verification: both sides publish their full-string parity. A
    # mismatch means reconciliation missed a difference (even error counts
    # can hide from block parities), so the session fails.
    if len(result.key_a) > 0:
        pa = block_parity(result.key_a, 1, len(result.key_a))
        pb = block_parity(result.key_b, 1, len(result.key_b))
    else:
        pa = pb = 0
    channel.send(Party.SENDER, "key_verify", {"parity": pa})
    channel.send(Party.RECEIVER, "key_verify", {"parity": pb})
    if pa != pb:
        raise ReconciliationFailure(report, stage.trace)

    key_a, key_b = result.key_a, result.key_b
    if cfg.amplify:
        discard = result.leaked_parity_count + AMPLIFY_SAFETY_BITS
        if discard > len(key_a):
            raise KeyTooShortError(
                f"cannot discard {discard} bits from a {len(key_a)}-bit key"
            )
        key_a = privacy_amplify(
            key_a, discard, random.Random(derive_seed(cfg.seed, "amplify.perm"))
        )
        key_b = privacy_amplify(
            key_b, discard, random.Random(derive_seed(cfg.seed, "amplify.perm"))
        )
    report.amplified_len = len(key_a)

    if len(key_a) < 7:
        raise KeyTooShortError(
            f"{len(key_a)} key bits are too few to derive session parameters"
        )
    params = derive_session(key_a, cfg.timing_rule)
    report.bsts_interval_ms = params.interval_ms
    report.bsts_bases = [params.base1.value, params.base2.value]

    message = cfg.message
    if message is None:
        message = BitString.random(
            cfg.message_bits, random.Random(derive_seed(cfg.seed, "message"))
        )
    bsts_channel = Channel(
        _quantum_config(cfg),
        random.Random(derive_seed(cfg.seed, "bsts.channel")),
        stage.clock,
        stage.trace,
    )
    start_ms = bsts_channel.now
    decoded = bsts_transfer(
        message,
        params,
        bsts_channel,
        random.Random(derive_seed(cfg.seed, "bsts.sender")),
        random.Random(derive_seed(cfg.seed, "bsts.receiver")),
    )
    report.receiver_error = hamming_distance(decoded, message) / len(message)
    report.message_delivered = decoded == message
    report.eve_accuracy = _eve_accuracy(
        bsts_channel.eve_log, message, params.interval_ms, start_ms
    )
    return report, stage.trace


def run_key_exchange(cfg: SessionConfig) -> tuple[dict[str, Any], SessionTrace]:
    """Run only the exchange/sift/sample/detect phase of a session."""
    cfg.validate()
    stage = _run_bb84_stage(cfg)
    result = {
        "sifted_len": stage.sifted_len,
        "qber": stage.qber,
        "eve_decision": stage.decision.value,
        "remaining_len": len(stage.remaining),
    }
    return result, stage.trace


def run_postprocess(
    key_a: BitString,
    key_b: BitString,
    params: ReconciliationParams,
    amplify: bool,
    seed: int,
) -> tuple[dict[str, Any], SessionTrace]:
    """Reconcile two keys (and optionally amplify) outside a full session.

    The keys are taken as given, as if produced by an earlier sifted
    exchange. Raises ReconciliationFailure when the final parities differ.
    """
    trace = SessionTrace()
    channel = Channel(QuantumChannelConfig(), random.Random(0), trace=trace)
    recon_rng = random.Random(derive_seed(seed, "recon.perm"))
    result = reconcile(key_a, key_b, params, channel, recon_rng)
    out: dict[str, Any] = {
        "reconciled_len": len(result.key_a),
        "leaked_parity_count": result.leaked_parity_count,
        "passes_run": result.passes_run,
        "discarded_positions": sorted(result.discarded_positions),
        "keys_equal": result.key_a == result.key_b,
        "key_a": result.key_a.to01(),
        "key_b": result.key_b.to01(),
    }
    if len(result.key_a) > 0:
        pa = block_parity(result.key_a, 1, len(result.key_a))
        pb = block_parity(result.key_b, 1, len(result.key_b))
    else:
        pa = pb = 0
    channel.send(Party.SENDER, "key_verify", {"parity": pa})
    channel.send(Party.RECEIVER, "key_verify", {"parity": pb})
    if pa != pb:
        report = SessionReport(
            sifted_len=len(key_a),
            qber=0.0,
            eve_decision=Decision.PROCEED.value,
            reconciled_len=len(result.key_a),
            leaked_parity_count=result.leaked_parity_count,
        )
        raise ReconciliationFailure(report, trace)
    if amplify:
        discard = result.leaked_parity_count + AMPLIFY_SAFETY_BITS
        if discard > len(result.key_a):
            raise KeyTooShortError(
                f"cannot discard {discard} bits from a "
                f"{len(result.key_a)}-bit key"
            )
        amp_rng_a = random.Random(derive_seed(seed, "amplify.perm"))
        amp_rng_b = random.Random(derive_seed(seed, "amplify.perm"))
        amplified_a = privacy_amplify(result.key_a, discard, amp_rng_a)
        amplified_b = privacy_amplify(result.key_b, discard, amp_rng_b)
        out["amplified_len"] = len(amplified_a)
        out["amplified_key"] = amplified_a.to01()
        out["keys_equal"] = out["keys_equal"] and amplified_a == amplified_b
    return out, trace


def run_transfer(
    key: BitString,
    message: BitString,
    timing_rule: str,
    noise_flip_prob: float,
    eve_mode: str,
    eve_basis_set: tuple[Basis, ...],
    seed: int,
) -> tuple[dict[str, Any], SessionTrace]:
    """Derive transfer parameters from a key and move one message.

    Runs only the synchronized-transfer phase on a fresh clock, with the
    configured channel effects applied to every photon.
    """
    if eve_mode not in EVE_MODES:
        raise InvalidConfigError(
            f"eve_mode must be one of {EVE_MODES}, got {eve_mode!r}"
        )
    if len(message) == 0:
        raise InvalidConfigError("message must be nonempty")
    params = derive_session(key, timing_rule)
    eavesdropper = None
    if eve_mode == EVE_MODE_INTERCEPT_RESEND:
        eavesdropper = InterceptResend(canonical_bases(eve_basis_set))
    qcfg = QuantumChannelConfig(
        noise_flip_prob=noise_flip_prob, eavesdropper=eavesdropper
    )
    channel = Channel(
        qcfg, random.Random(derive_seed(seed, "bsts.channel"))
    )
    decoded = bsts_transfer(
        message,
        params,
        channel,
        random.Random(derive_seed(seed, "bsts.sender")),
        random.Random(derive_seed(seed, "bsts.receiver")),
    )
    result: dict[str, Any] = {
        "base1": params.base1.value,
        "base2": params.base2.value,
        "interval_ms": params.interval_ms,
        "schedule": "".join(b.value for b in params.schedule),
        "decoded": decoded.to01(),
        "message_delivered": decoded == message,
        "receiver_error": hamming_distance(decoded, message) / len(message),
        "eve_accuracy": _eve_accuracy(
            channel.eve_log, message, params.interval_ms, 0
        ),
    }
    return result, channel.trace


def run_sweep(
    cfg: SessionConfig, runs: int
) -> tuple[dict[str, Any], list[SessionReport]]:
    """Run the session at seeds seed..seed+runs-1 and summarize the reports.

    Aborted runs contribute their exchange fields; runs whose final parity
    check fails contribute their partial reports and are counted.
    """
    if runs < 1:
        raise InvalidConfigError(f"runs must be >= 1, got {runs}")
    reports: list[SessionReport] = []
    failures = 0
    for i in range(runs):
        run_cfg = replace(cfg, seed=cfg.seed + i)
        try:
            report, _ = run_full_session(run_cfg)
        except ReconciliationFailure as exc:
            report = exc.report
            failures += 1
        reports.append(report)
    summary = summarize(reports)
    summary["aborts"] = sum(1 for r in reports if r.eve_decision == "Abort")
    summary["reconciliation_failures"] = failures
    return summary, reports


_SUMMARY_FIELDS = (
    "sifted_len",
    "qber",
    "reconciled_len",
    "leaked_parity_count",
    "amplified_len",
    "bsts_interval_ms",
    "message_delivered",
    "receiver_error",
    "eve_accuracy",
)


def summarize(reports: list[SessionReport]) -> dict[str, Any]:
    """Mean and standard error per numeric report field.

    Fields that are None in a report (not reached) are skipped for that
    report; booleans count as 0/1. The standard error of a single value
    is 0.0.
    """
    if not reports:
        raise ValueError("no reports to summarize")
    fields: dict[str, dict[str, float]] = {}
    for name in _SUMMARY_FIELDS:
        values = [
            float(value)
            for report in reports
            if (value := getattr(report, name)) is not None
        ]
        if not values:
            continue
        mean = statistics.fmean(values)
        stderr = (
            statistics.stdev(values) / math.sqrt(len(values))
            if len(values) >= 2
            else 0.0
        )
        fields[name] = {"mean": mean, "stderr": stderr, "n": len(values)}
    return {"n": len(reports), "fields": fields}


def emit_trace(trace: SessionTrace, path: str) -> None:
    """Write a trace to a JSON file."""
    with open(path, "w", encoding="utf-8") as f:
        json.dump(trace.to_dict(), f)
        f.write("\n")


def load_trace(path: str) -> SessionTrace:
    """Read a trace back from a JSON file written by emit_trace."""
    with open(path, "r", encoding="utf-8") as f:
        data = json.load(f)
    return SessionTrace.from_dict(data)
