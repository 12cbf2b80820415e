"""Tests for the key-exchange phase: prepare, measure, sift, sample, detect."""

import math
import random

import pytest

from bstsim.bb84 import (
    DEFAULT_BASIS_POOL,
    BitString,
    Decision,
    detect_eve,
    estimate_qber,
    exchange,
    hamming_distance,
    receiver_measure,
    sender_prepare,
    sift,
)
from bstsim.channels import Channel, InterceptResend, QuantumChannelConfig
from bstsim.photon import Basis, basis_of, bit_of


def _channel(noise=0.0, eve_bases=None, seed=0):
    eavesdropper = InterceptResend(tuple(eve_bases)) if eve_bases else None
    cfg = QuantumChannelConfig(noise_flip_prob=noise, eavesdropper=eavesdropper)
    return Channel(cfg, random.Random(seed))


class TestBitString:
    def test_from01_and_back(self):
        bits = BitString.from01("0110")
        assert bits.bits == [0, 1, 1, 0]
        assert bits.to01() == "0110"
        assert len(bits) == 4

    def test_positions_are_one_based(self):
        bits = BitString.from01("10")
        assert bits.bit(1) == 1
        assert bits.bit(2) == 0
        with pytest.raises(ValueError):
            bits.bit(0)
        with pytest.raises(ValueError):
            bits.bit(3)

    def test_rejects_non_bits(self):
        with pytest.raises(ValueError):
            BitString.from01("012")
        with pytest.raises(ValueError):
            BitString([0, 2])

    def test_random_is_seeded(self):
        a = BitString.random(64, random.Random(9))
        b = BitString.random(64, random.Random(9))
        assert a == b

    def test_hamming_distance(self):
        assert hamming_distance(BitString.from01("0110"), BitString.from01("0011")) == 2
        with pytest.raises(ValueError):
            hamming_distance(BitString.from01("01"), BitString.from01("0"))


class TestPrepareAndMeasure:
    def test_prepared_photons_encode_the_drawn_bits(self):
        bits, bases, photons = sender_prepare(64, random.Random(1))
        assert len(bits) == len(bases) == len(photons) == 64
        for i, photon in enumerate(photons):
            assert photon.tag == i + 1
            assert basis_of(photon.polarization) is bases[i]
            assert bit_of(photon.polarization) == bits.bits[i]
            assert bases[i] in DEFAULT_BASIS_POOL

    def test_prepare_rejects_non_positive_counts(self):
        with pytest.raises(ValueError):
            sender_prepare(0, random.Random(0))

    def test_basis_choice_is_roughly_balanced(self):
        n = 10_000
        _, bases, _ = sender_prepare(n, random.Random(2))
        fraction = sum(b is Basis.RECTILINEAR for b in bases) / n
        assert abs(fraction - 0.5) <= 4 * math.sqrt(0.25 / n)

    def test_single_basis_pool_forces_agreement(self):
        # With a one-basis pool every measurement matches the preparation.
        bits, _, photons = sender_prepare(
            128, random.Random(3), basis_pool=(Basis.CIRCULAR,)
        )
        bases, observed = receiver_measure(
            photons, random.Random(4), basis_pool=(Basis.CIRCULAR,)
        )
        assert all(b is Basis.CIRCULAR for b in bases)
        assert observed == bits

    def test_measure_rejects_empty_photon_list(self):
        with pytest.raises(ValueError):
            receiver_measure([], random.Random(0))


class TestSift:
    def test_mixed_basis_example(self):
        bits = BitString.from01("1011")
        sender_bases = [
            Basis.RECTILINEAR,
            Basis.DIAGONAL,
            Basis.RECTILINEAR,
            Basis.DIAGONAL,
        ]
        receiver_bases = [
            Basis.RECTILINEAR,
            Basis.RECTILINEAR,
            Basis.RECTILINEAR,
            Basis.DIAGONAL,
        ]
        observed = BitString.from01("1111")
        result = sift(bits, sender_bases, receiver_bases, observed)
        assert result.kept_indices == [1, 3, 4]
        assert result.sender_key.to01() == "111"
        assert result.receiver_key.to01() == "111"
        assert len(result) == 3

    def test_length_mismatch_rejected(self):
        with pytest.raises(ValueError):
            sift(
                BitString.from01("01"),
                [Basis.RECTILINEAR],
                [Basis.RECTILINEAR],
                BitString.from01("01"),
            )

    def test_sift_announces_bases_and_positions(self):
        channel = _channel()
        bits = BitString.from01("10")
        bases = [Basis.RECTILINEAR, Basis.DIAGONAL]
        result = sift(bits, bases, bases, bits, channel)
        assert result.kept_indices == [1, 2]
        reveal = [
            e
            for e in channel.trace.events
            if e["kind"] == "classical" and e["type"] == "basis_reveal"
        ]
        agree = [
            e
            for e in channel.trace.events
            if e["kind"] == "classical" and e["type"] == "basis_agree"
        ]
        assert reveal[0]["body"] == {"bases": "RD"}
        assert agree[0]["body"] == {"positions": [1, 2]}

    def test_sifted_fraction_near_half(self):
        n = 4096
        channel = _channel(seed=5)
        bits, bases, rbases, rbits = exchange(
            n, channel, random.Random(6), random.Random(7)
        )
        result = sift(bits, bases, rbases, rbits)
        fraction = len(result) / n
        assert abs(fraction - 0.5) <= 4 * math.sqrt(0.25 / n)


class TestExchange:
    def test_noiseless_exchange_agrees_on_sifted_positions(self):
        channel = _channel(seed=8)
        bits, bases, rbases, rbits = exchange(
            1024, channel, random.Random(9), random.Random(10)
        )
        result = sift(bits, bases, rbases, rbits)
        assert result.sender_key == result.receiver_key

    def test_exchange_traces_every_photon(self):
        channel = _channel(seed=11)
        exchange(50, channel, random.Random(12), random.Random(13))
        assert channel.trace.count(kind="photon_sent") == 50
        assert channel.trace.count(kind="photon_measured") == 50
        assert channel.now == 50
        times = [e["t_ms"] for e in channel.trace.events]
        assert times == sorted(times)

    def test_exchange_rejects_non_positive_counts(self):
        with pytest.raises(ValueError):
            exchange(0, _channel(), random.Random(0), random.Random(1))

    def test_exchange_determinism(self):
        def run():
            channel = _channel(noise=0.05, eve_bases=DEFAULT_BASIS_POOL, seed=14)
            return exchange(256, channel, random.Random(15), random.Random(16))

        first = run()
        second = run()
        assert first[0] == second[0]
        assert first[1] == second[1]
        assert first[2] == second[2]
        assert first[3] == second[3]


class TestEstimateQber:
    def test_identical_keys_give_zero(self):
        channel = _channel(seed=17)
        bits, bases, rbases, rbits = exchange(
            512, channel, random.Random(18), random.Random(19)
        )
        result = sift(bits, bases, rbases, rbits)
        qber, remaining = estimate_qber(result, 50, channel, random.Random(20))
        assert qber == 0.0
        assert len(remaining) == len(result) - 50

    def test_full_sample_counts_exact_disagreements(self):
        # 25 of 100 bits differ and the whole key is disclosed.
        sender = BitString([0] * 100)
        receiver = BitString([1] * 25 + [0] * 75)
        result = sift(
            sender,
            [Basis.RECTILINEAR] * 100,
            [Basis.RECTILINEAR] * 100,
            receiver,
        )
        channel = _channel()
        qber, remaining = estimate_qber(result, 100, channel, random.Random(0))
        assert qber == 0.25
        assert len(remaining) == 0

    def test_sample_positions_are_burned(self):
        sender = BitString([0, 1, 0, 1, 0, 1])
        bases = [Basis.RECTILINEAR] * 6
        result = sift(sender, bases, bases, sender)
        channel = _channel()
        _, remaining = estimate_qber(result, 2, channel, random.Random(1))
        assert len(remaining) == 4
        assert len(set(remaining.kept_indices)) == 4
        burned = set(result.kept_indices) - set(remaining.kept_indices)
        discard_events = [
            e["position"] for e in channel.trace.events if e["kind"] == "discard"
        ]
        assert set(discard_events) == burned
        # Remaining keys are the original keys minus the burned positions.
        survivors = [i for i in result.kept_indices if i not in burned]
        assert remaining.kept_indices == survivors

    def test_disclosure_messages_pair_positions_and_bits(self):
        sender = BitString([1, 0, 1])
        bases = [Basis.DIAGONAL] * 3
        result = sift(sender, bases, bases, sender)
        channel = _channel()
        estimate_qber(result, 3, channel, random.Random(2))
        samples = [
            e
            for e in channel.trace.events
            if e["kind"] == "classical" and e["type"] == "qber_sample"
        ]
        assert len(samples) == 2
        assert samples[0]["body"]["pairs"] == [[1, 1], [2, 0], [3, 1]]
        assert samples[1]["body"]["pairs"] == [[1, 1], [2, 0], [3, 1]]

    def test_oversized_sample_rejected(self):
        sender = BitString([0, 1])
        bases = [Basis.RECTILINEAR] * 2
        result = sift(sender, bases, bases, sender)
        with pytest.raises(ValueError):
            estimate_qber(result, 3, _channel(), random.Random(0))

    def test_eve_pushes_estimate_toward_quarter(self):
        n = 10_000
        channel = _channel(eve_bases=DEFAULT_BASIS_POOL, seed=23)
        bits, bases, rbases, rbits = exchange(
            n, channel, random.Random(24), random.Random(25)
        )
        result = sift(bits, bases, rbases, rbits)
        sample = 500
        qber, _ = estimate_qber(result, sample, channel, random.Random(26))
        assert abs(qber - 0.25) <= 4 * math.sqrt(0.25 * 0.75 / sample)


class TestDetectEve:
    @pytest.mark.parametrize(
        "qber,threshold,expected",
        [
            (0.0, 0.11, Decision.PROCEED),
            (0.11, 0.11, Decision.PROCEED),
            (0.12, 0.11, Decision.ABORT),
            (0.25, 0.11, Decision.ABORT),
            (0.5, 0.5, Decision.PROCEED),
        ],
    )
    def test_strict_threshold(self, qber, threshold, expected):
        assert detect_eve(qber, threshold) is expected

    def test_rejects_out_of_range_inputs(self):
        with pytest.raises(ValueError):
            detect_eve(-0.1, 0.11)
        with pytest.raises(ValueError):
            detect_eve(0.1, 1.5)

    def test_decision_recorded_in_trace(self):
        channel = _channel()
        channel.tick()
        detect_eve(0.3, 0.11, channel)
        assert channel.trace.events[-1] == {
            "t_ms": 1,
            "kind": "decision",
            "name": "eve_check",
            "value": "Abort",
        }

    def test_detection_power_over_seeded_sessions(self):
        # Smaller-scale version of the detection-power property; the full
        # thousand-session run lives in the acceptance suite.
        aborts = 0
        runs = 100
        for seed in range(runs):
            channel = _channel(eve_bases=DEFAULT_BASIS_POOL, seed=1000 + seed)
            bits, bases, rbases, rbits = exchange(
                2048, channel, random.Random(2000 + seed), random.Random(3000 + seed)
            )
            result = sift(bits, bases, rbases, rbits)
            qber, _ = estimate_qber(result, 200, channel, random.Random(4000 + seed))
            if detect_eve(qber, 0.11) is Decision.ABORT:
                aborts += 1
        assert aborts >= 99
