"""Deterministic simulator of BB84 key exchange with schedule-synchronized
covert message transfer over a never-silent photon stream."""

from .bb84 import (
    BitString,
    Decision,
    SiftResult,
    detect_eve,
    estimate_qber,
    exchange,
    hamming_distance,
    receiver_measure,
    sender_prepare,
    sift,
)
from .bsts import (
    BASE_PAIR_TABLE,
    KeyTooShortError,
    ProtocolViolation,
    SessionParams,
    bsts_receive,
    bsts_send,
    bsts_transfer,
    derive_session,
    schedule_basis,
    select_bases,
    simulate_bsts_eve,
    timing_interval,
)
from .channels import (
    Channel,
    ClassicalMessage,
    Clock,
    EveRecord,
    InterceptResend,
    Party,
    QuantumChannelConfig,
    SessionTrace,
    eve_intercept,
    send_classical,
    tick,
    transmit_quantum,
)
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
from .postprocess import (
    AMPLIFY_SAFETY_BITS,
    ReconciliationParams,
    ReconciliationResult,
    bisect_error,
    block_parity,
    privacy_amplify,
    reconcile,
)
from .seeding import derive_seed
from .session import (
    InvalidConfigError,
    ReconciliationFailure,
    SessionConfig,
    SessionReport,
    emit_trace,
    load_trace,
    run_full_session,
    run_key_exchange,
    run_postprocess,
    run_sweep,
    run_transfer,
    summarize,
)

__version__ = "0.1.0"

__all__ = [
    "AMPLIFY_SAFETY_BITS",
    "BASE_PAIR_TABLE",
    "Basis",
    "BitString",
    "Channel",
    "ClassicalMessage",
    "Clock",
    "Decision",
    "EveRecord",
    "InterceptResend",
    "InvalidConfigError",
    "KeyTooShortError",
    "Party",
    "Photon",
    "Polarization",
    "ProtocolViolation",
    "QuantumChannelConfig",
    "ReconciliationFailure",
    "ReconciliationParams",
    "ReconciliationResult",
    "SessionConfig",
    "SessionParams",
    "SessionReport",
    "SessionTrace",
    "SiftResult",
    "basis_of",
    "bisect_error",
    "bit_of",
    "block_parity",
    "bsts_receive",
    "bsts_send",
    "bsts_transfer",
    "canonical_bases",
    "derive_seed",
    "derive_session",
    "detect_eve",
    "emit_trace",
    "encode",
    "estimate_qber",
    "eve_intercept",
    "exchange",
    "hamming_distance",
    "load_trace",
    "measure",
    "privacy_amplify",
    "receiver_measure",
    "reconcile",
    "run_full_session",
    "run_key_exchange",
    "run_postprocess",
    "run_sweep",
    "run_transfer",
    "schedule_basis",
    "select_bases",
    "sender_prepare",
    "send_classical",
    "sift",
    "simulate_bsts_eve",
    "summarize",
    "tick",
    "timing_interval",
    "transmit_quantum",
]
