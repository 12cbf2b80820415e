"""Tests for the clock, trace, classical channel, noise, and eavesdropper."""

import json
import math
import random

import pytest

from bstsim.channels import (
    Channel,
    ClassicalMessage,
    Clock,
    InterceptResend,
    Party,
    QuantumChannelConfig,
    SessionTrace,
    eve_intercept,
    send_classical,
    tick,
    transmit_quantum,
)
from bstsim.photon import Basis, Photon, Polarization, basis_of, bit_of, encode, measure


def test_clock_ticks_by_one_ms():
    clock = Clock()
    assert clock.now_ms == 0
    tick(clock)
    tick(clock)
    assert clock.now_ms == 2


def test_identity_channel_preserves_polarization():
    cfg = QuantumChannelConfig()
    rng = random.Random(0)
    for pol in Polarization:
        photon = transmit_quantum(Photon(pol), cfg, rng)
        assert photon.polarization is pol


def test_noise_one_always_flips_within_basis():
    cfg = QuantumChannelConfig(noise_flip_prob=1.0)
    rng = random.Random(0)
    for pol in Polarization:
        photon = transmit_quantum(Photon(pol), cfg, rng)
        assert basis_of(photon.polarization) is basis_of(pol)
        assert bit_of(photon.polarization) == 1 - bit_of(pol)


def test_noise_frequency_matches_probability():
    p = 0.1
    n = 10_000
    cfg = QuantumChannelConfig(noise_flip_prob=p)
    rng = random.Random(11)
    flips = 0
    for _ in range(n):
        photon = transmit_quantum(Photon(Polarization.DEG0), cfg, rng)
        flips += photon.polarization is Polarization.DEG90
    tolerance = 4 * math.sqrt(p * (1 - p) / n)
    assert abs(flips / n - p) <= tolerance


def test_noise_probability_out_of_range_rejected():
    with pytest.raises(ValueError):
        QuantumChannelConfig(noise_flip_prob=-0.1)
    with pytest.raises(ValueError):
        QuantumChannelConfig(noise_flip_prob=1.5)


def test_intercept_resend_requires_bases():
    with pytest.raises(ValueError):
        InterceptResend(())
    assert InterceptResend(
        (Basis.CIRCULAR, Basis.RECTILINEAR)
    ).basis_set == (Basis.RECTILINEAR, Basis.CIRCULAR)


def test_eve_matching_basis_is_invisible():
    rng = random.Random(0)
    photon = Photon(Polarization.DEG45)
    forwarded, bit, basis = eve_intercept(photon, [Basis.DIAGONAL], rng)
    assert basis is Basis.DIAGONAL
    assert bit == 0
    assert forwarded.polarization is Polarization.DEG45


def test_eve_mismatched_basis_repolarizes():
    rng = random.Random(3)
    photon = Photon(Polarization.DEG0)
    forwarded, bit, basis = eve_intercept(photon, [Basis.DIAGONAL], rng)
    assert basis is Basis.DIAGONAL
    assert forwarded.polarization in (Polarization.DEG45, Polarization.DEG135)
    assert bit == bit_of(forwarded.polarization)


def test_eve_induces_quarter_error_on_true_basis_readout():
    # Receiver measures in the preparation basis; only Eve disturbs.
    n = 10_000
    eve = InterceptResend((Basis.RECTILINEAR, Basis.DIAGONAL))
    cfg = QuantumChannelConfig(eavesdropper=eve)
    channel_rng = random.Random(21)
    coder_rng = random.Random(22)
    errors = 0
    for _ in range(n):
        bit = coder_rng.getrandbits(1)
        basis = coder_rng.choice((Basis.RECTILINEAR, Basis.DIAGONAL))
        photon = transmit_quantum(Photon(encode(bit, basis)), cfg, channel_rng)
        observed, _ = measure(photon, basis, coder_rng)
        errors += observed != bit
    tolerance = 4 * math.sqrt(0.25 * 0.75 / n)
    assert abs(errors / n - 0.25) <= tolerance


def test_eve_log_records_every_interception():
    eve = InterceptResend((Basis.RECTILINEAR,))
    cfg = QuantumChannelConfig(eavesdropper=eve)
    channel = Channel(cfg, random.Random(0))
    for tag in range(1, 6):
        channel.transmit(Photon(Polarization.DEG90, tag=tag))
    assert [record.tag for record in channel.eve_log] == [1, 2, 3, 4, 5]
    assert all(record.basis is Basis.RECTILINEAR for record in channel.eve_log)
    assert [record.bit for record in channel.eve_log] == [1, 1, 1, 1, 1]


def test_classical_message_delivered_and_traced():
    trace = SessionTrace()
    eve_view = []
    message = ClassicalMessage(Party.SENDER, "basis_reveal", {"bases": "RD"}, t_ms=4)
    delivered = send_classical(message, trace, eve_view)
    assert delivered is message
    assert eve_view == [message]
    assert trace.events == [
        {
            "t_ms": 4,
            "kind": "classical",
            "from": "sender",
            "type": "basis_reveal",
            "body": {"bases": "RD"},
        }
    ]


def test_channel_send_stamps_current_time_and_feeds_eve_view():
    channel = Channel(QuantumChannelConfig(), random.Random(0))
    channel.tick()
    channel.tick()
    first = channel.send(Party.SENDER, "parity", {"parity": 1})
    second = channel.send(Party.RECEIVER, "parity", {"parity": 0})
    assert first.t_ms == 2 and second.t_ms == 2
    # Eve's public view is exactly the sequence of classical messages.
    assert channel.eve_view == [first, second]
    assert channel.trace.count(kind="classical", message_type="parity") == 2


def test_trace_timestamps_non_decreasing_after_out_of_order_append():
    trace = SessionTrace()
    trace.add(5, "photon_sent", tag=1, polarization="0deg", real=True)
    trace.add(3, "photon_measured", tag=0, basis="R", bit=0)
    trace.add(5, "discard", position=2)
    times = [event["t_ms"] for event in trace.events]
    assert times == sorted(times)


def test_trace_json_round_trip():
    trace = SessionTrace()
    trace.photon_sent(1, 1, Polarization.SPIN_L, real=False)
    trace.photon_measured(1, 1, Basis.CIRCULAR, 0)
    trace.discard(2, 17)
    trace.decision(2, "eve_check", "Proceed")
    encoded = json.dumps(trace.to_dict())
    restored = SessionTrace.from_dict(json.loads(encoded))
    assert restored.to_dict() == trace.to_dict()


def test_trace_from_dict_rejects_malformed_documents():
    with pytest.raises(ValueError):
        SessionTrace.from_dict({"not_events": []})
    with pytest.raises(ValueError):
        SessionTrace.from_dict({"events": [{"kind": "missing_time"}]})
    with pytest.raises(ValueError):
        SessionTrace.from_dict({"events": "nope"})


def test_trace_serializes_normative_field_names():
    trace = SessionTrace()
    trace.photon_sent(1, 9, Polarization.DEG135, real=True)
    event = trace.to_dict()["events"][0]
    assert event == {
        "t_ms": 1,
        "kind": "photon_sent",
        "tag": 9,
        "polarization": "135deg",
        "real": True,
    }


def test_transmission_determinism():
    cfg = QuantumChannelConfig(
        noise_flip_prob=0.3,
        eavesdropper=InterceptResend((Basis.RECTILINEAR, Basis.DIAGONAL)),
    )

    def run():
        rng = random.Random(77)
        out = []
        for tag in range(200):
            photon = transmit_quantum(Photon(Polarization.DEG45, tag=tag), cfg, rng)
            out.append(photon.polarization)
        return out

    assert run() == run()
