"""
Tests for the phy app.

Run with: python manage.py test phy
"""
import tempfile
from io import StringIO
from pathlib import Path

import numpy as np
from django.core.management import call_command
from django.core.management.base import CommandError
from django.test import SimpleTestCase, TestCase

from cdma_underlay import __version__

from .channel import (
    ChannelConfig,
    OfdmInterfererConfig,
    UePlacement,
    apply_awgn,
    apply_channel,
    apply_self_interference_cancellation,
    child_seed,
    complex_awgn,
    derive_seed,
    generate_ofdm_interferer,
    measure_sinr_db,
    superpose,
)
from .framing import (
    IntegrityFailure,
    MacFrame,
    bits_to_bytes,
    bytes_to_bits,
    crc16_ccitt_false,
    decode_frame,
    encode_frame,
    format_frame,
)
from .iqfile import IqFormatError, meta_path, read_iq, write_iq
from .management.base import UnderlayCommand
from .modem import (
    BasebandSignal,
    TxConfig,
    build_packet_signal,
    build_packet_train,
    nominal_bit_rate,
    packet_length_samples,
)
from .receiver import (
    DetectionEvent,
    DetectorConfig,
    benchmark_correlation,
    correlate_preamble,
    default_detector,
    demodulate_body,
    detect_and_decode,
    select_start,
)
from .spreading import (
    SpreadingCode,
    assignable_rows,
    despread,
    hadamard_matrix,
    hadamard_row,
    hard_decide,
    preamble_code,
    spread,
)


def crc_long_division(bits):
    """Reference CRC-16/CCITT-FALSE by polynomial long division on Python ints."""
    n = len(bits)
    message = 0
    for bit in bits:
        message = (message << 1) | int(bit)
    dividend = (message << 16) ^ (0xFFFF << n)
    poly = 0x11021
    for shift in range(dividend.bit_length() - 17, -1, -1):
        if dividend >> (shift + 16) & 1:
            dividend ^= poly << shift
    return dividend


def tx_config(row, samples_per_chip=1):
    return TxConfig(ue_code=hadamard_row(64, row), samples_per_chip=samples_per_chip)


def place(signal, offset, tail=64):
    """Signal preceded by `offset` zeros and followed by `tail` zeros."""
    samples = np.concatenate([np.zeros(offset), signal.samples, np.zeros(tail)])
    return signal.with_samples(samples)


class HadamardTest(SimpleTestCase):
    """Tests for code generation."""

    def test_all_row_pairs_orthogonal(self):
        """Every pair of order-64 rows has dot product 64 (same row) or 0."""
        matrix = hadamard_matrix(64).astype(np.int64)
        np.testing.assert_array_equal(matrix @ matrix.T, 64 * np.eye(64, dtype=np.int64))

    def test_row_zero_is_dc_and_row_one_alternates(self):
        self.assertTrue(np.all(hadamard_row(64, 0).chips == 1))
        np.testing.assert_array_equal(preamble_code(64).chips, np.tile([1, -1], 32))

    def test_matrix_is_read_only(self):
        with self.assertRaises(ValueError):
            hadamard_matrix(64)[0, 0] = -1

    def test_invalid_order(self):
        for order in (0, 3, 48, 8192):
            with self.subTest(order=order):
                with self.assertRaises(ValueError):
                    hadamard_row(order, 0)

    def test_invalid_row(self):
        for row in (-1, 64):
            with self.subTest(row=row):
                with self.assertRaises(ValueError):
                    hadamard_row(64, row)

    def test_assignable_rows(self):
        rows = assignable_rows(64)
        self.assertEqual(len(rows), 62)
        self.assertEqual(rows[0], 2)
        self.assertEqual(rows[-1], 63)
        self.assertFalse(hadamard_row(64, 1).is_assignable)
        self.assertTrue(hadamard_row(64, 2).is_assignable)

    def test_code_identity(self):
        """Codes compare and hash by (order, row)."""
        self.assertEqual(hadamard_row(64, 5), hadamard_row(64, 5))
        self.assertNotEqual(hadamard_row(64, 5), hadamard_row(32, 5))
        self.assertEqual(len({hadamard_row(64, 5), hadamard_row(64, 5), hadamard_row(64, 6)}), 2)
        self.assertIsInstance(hadamard_row(4, 3), SpreadingCode)


class SpreadingTest(SimpleTestCase):
    """Tests for spreading and despreading."""

    def setUp(self):
        self.bits = np.array([0, 1, 1, 0, 1, 0, 0, 0, 1], dtype=np.uint8)
        self.code = hadamard_row(64, 5)

    def test_spread_length_and_layout(self):
        chips = spread(self.bits, self.code)
        self.assertEqual(chips.size, self.bits.size * 64)
        np.testing.assert_array_equal(chips[:64], self.code.chips)
        np.testing.assert_array_equal(chips[64:128], -self.code.chips)

    def test_despread_same_code_is_exact(self):
        metrics = despread(spread(self.bits, self.code), self.code)
        np.testing.assert_array_equal(metrics, 1 - 2 * self.bits.astype(float))
        np.testing.assert_array_equal(hard_decide(metrics), self.bits)

    def test_despread_other_code_is_zero(self):
        """Chip-aligned rows of the same matrix do not see each other."""
        metrics = despread(spread(self.bits, self.code), hadamard_row(64, 9))
        np.testing.assert_array_equal(metrics, np.zeros(self.bits.size))

    def test_samples_per_chip(self):
        samples = np.repeat(spread(self.bits, self.code).astype(float), 4)
        metrics = despread(samples, self.code, samples_per_chip=4)
        np.testing.assert_array_equal(hard_decide(metrics), self.bits)

    def test_tie_decides_zero(self):
        np.testing.assert_array_equal(hard_decide([0.0, -0.0, 1e-9, -1e-9]), [0, 0, 0, 1])

    def test_empty_bits_rejected(self):
        with self.assertRaises(ValueError):
            spread([], self.code)

    def test_non_binary_bits_rejected(self):
        with self.assertRaises(ValueError):
            spread([0, 2, 1], self.code)

    def test_despread_is_linear(self):
        rng = np.random.default_rng(12)
        x, y = rng.standard_normal((2, 64 * 9))
        a, b = 2.5, -0.75
        np.testing.assert_allclose(
            despread(a * x + b * y, self.code),
            a * despread(x, self.code) + b * despread(y, self.code),
            rtol=1e-9,
            atol=1e-12,
        )

    def test_despread_adds_projected_noise(self):
        """Spread bits plus noise despread to the symbols plus the noise's projection on the code."""
        noise = np.random.default_rng(13).standard_normal(self.bits.size * 64)
        metrics = despread(spread(self.bits, self.code) + noise, self.code)
        expected = 1 - 2 * self.bits.astype(float) + noise.reshape(-1, 64) @ self.code.chips / 64
        np.testing.assert_allclose(metrics, expected, rtol=1e-9, atol=1e-12)

    def test_despread_length_must_match_order(self):
        with self.assertRaises(ValueError):
            despread(np.ones(100), self.code)


class CrcTest(SimpleTestCase):
    """Tests for CRC-16/CCITT-FALSE."""

    def test_check_value(self):
        self.assertEqual(crc16_ccitt_false(bytes_to_bits(b'123456789')), 0x29B1)

    def test_empty_input_is_init(self):
        self.assertEqual(crc16_ccitt_false(np.zeros(0, dtype=np.uint8)), 0xFFFF)

    def test_matches_long_division(self):
        """Table-driven CRC equals polynomial long division on 10,000 random inputs."""
        rng = np.random.default_rng(2024)
        for _ in range(10_000):
            bits = rng.integers(0, 2, size=int(rng.integers(0, 200)), dtype=np.uint8)
            self.assertEqual(crc16_ccitt_false(bits), crc_long_division(bits.tolist()))

    def test_long_division_check_value(self):
        self.assertEqual(crc_long_division(bytes_to_bits(b'123456789').tolist()), 0x29B1)


class FramingTest(SimpleTestCase):
    """Tests for MAC frame encoding and decoding."""

    def test_frame_lengths(self):
        for length in range(16):
            with self.subTest(length=length):
                self.assertEqual(encode_frame(0x42, bytes(length)).size, 32 + 8 * length)

    def test_max_frame_is_152_bits(self):
        self.assertEqual(encode_frame(0xFF, bytes(range(15))).size, 152)

    def test_layout(self):
        bits = encode_frame(0x2A, b'\x01\x02')
        self.assertEqual(bits_to_bytes(bits[:8]), b'\x2a')
        np.testing.assert_array_equal(bits[8:12], [0, 0, 1, 0])
        np.testing.assert_array_equal(bits[12:16], [0, 0, 0, 0])
        self.assertEqual(bits_to_bytes(bits[16:32]), b'\x01\x02')

    def test_round_trip_all_lengths(self):
        rng = np.random.default_rng(7)
        for length in range(16):
            payload = rng.integers(0, 256, size=length, dtype=np.uint8).tobytes()
            with self.subTest(length=length):
                frame = decode_frame(encode_frame(0x81, payload))
                self.assertEqual(frame, MacFrame(0x81, payload))
                self.assertEqual(frame.length, length)

    def test_every_single_and_adjacent_double_flip_detected(self):
        bits = encode_frame(0x5C, bytes(range(100, 115)))
        for i in range(bits.size):
            flipped = bits.copy()
            flipped[i] ^= 1
            self.assertFalse(decode_frame(flipped), f'single flip at {i} passed')
            if i + 1 < bits.size:
                flipped[i + 1] ^= 1
                self.assertFalse(decode_frame(flipped), f'double flip at {i} passed')

    def test_integrity_failures(self):
        bits = encode_frame(0x10, b'\xaa\xbb')
        short = decode_frame(bits[:31])
        self.assertIsInstance(short, IntegrityFailure)
        self.assertEqual(short.reason, 'short')

        self.assertEqual(decode_frame(bits[:-8]).reason, 'length')

        corrupted = bits.copy()
        corrupted[20] ^= 1
        failure = decode_frame(corrupted)
        self.assertEqual(failure.reason, 'crc')
        self.assertNotEqual(failure.expected_crc, failure.actual_crc)
        self.assertEqual(failure.actual_crc, MacFrame(0x10, b'\xaa\xbb').crc)

    def test_invalid_frames_rejected(self):
        with self.assertRaises(ValueError):
            MacFrame(256)
        with self.assertRaises(ValueError):
            MacFrame(-1)
        with self.assertRaises(ValueError):
            encode_frame(0, bytes(16))

    def test_format_frame(self):
        self.assertEqual(format_frame(MacFrame(0x2A, b'\x01\x02')), 'addr=0x2a len=2 payload=0102 crc=ok')


class ModemTest(SimpleTestCase):
    """Tests for packet construction."""

    def test_packet_length_formula(self):
        self.assertEqual(packet_length_samples(15), 9792)
        self.assertEqual(packet_length_samples(2), 3136)
        self.assertEqual(packet_length_samples(0), 64 + 64 * 32)
        self.assertEqual(packet_length_samples(15, samples_per_chip=4), 4 * 9792)

    def test_max_packet_close_to_processing_window(self):
        self.assertLessEqual(abs(packet_length_samples(15) - 10_000) / 10_000, 0.03)

    def test_packet_signal_matches_formula(self):
        for length in (0, 7, 15):
            signal = build_packet_signal(MacFrame(1, bytes(length)), tx_config(9))
            self.assertEqual(len(signal), packet_length_samples(length))

    def test_packet_is_real_bpsk(self):
        signal = build_packet_signal(MacFrame(1, b'hi'), tx_config(9))
        self.assertTrue(np.all(signal.samples.imag == 0))
        self.assertTrue(np.all(np.abs(signal.samples.real) == 1))
        np.testing.assert_array_equal(signal.samples[:64].real, preamble_code().chips)

    def test_nominal_bit_rate(self):
        self.assertEqual(nominal_bit_rate(tx_config(2), 1e6), 15625.0)
        self.assertEqual(nominal_bit_rate(tx_config(2, samples_per_chip=2), 1e6), 15625.0 / 2)

    def test_packet_train(self):
        frames = [MacFrame(1, b'a'), MacFrame(2, b'bc')]
        train = build_packet_train(frames, 100, tx_config(3))
        first = packet_length_samples(1)
        self.assertEqual(len(train), first + 100 + packet_length_samples(2))
        self.assertTrue(np.all(train.samples[first:first + 100] == 0))

    def test_packet_train_per_gap(self):
        frames = [MacFrame(1), MacFrame(2), MacFrame(3)]
        train = build_packet_train(frames, [10, 20], tx_config(3))
        self.assertEqual(len(train), 3 * packet_length_samples(0) + 30)

    def test_amplitude_scales_every_sample(self):
        cfg = TxConfig(ue_code=hadamard_row(64, 9), amplitude=0.5)
        signal = build_packet_signal(MacFrame(1, b'hi'), cfg)
        np.testing.assert_array_equal(np.abs(signal.samples), np.full(len(signal), 0.5))

    def test_reserved_rows_rejected(self):
        for row in (0, 1):
            with self.subTest(row=row):
                with self.assertRaises(ValueError):
                    tx_config(row)

    def test_order_mismatch_rejected(self):
        with self.assertRaises(ValueError):
            TxConfig(ue_code=hadamard_row(32, 5))

    def test_signal_validation(self):
        with self.assertRaises(ValueError):
            BasebandSignal(np.array([1.0, np.nan]))
        with self.assertRaises(ValueError):
            BasebandSignal(np.ones((2, 2)))
        with self.assertRaises(ValueError):
            BasebandSignal(np.ones(4), sample_rate_hz=0)


class CorrelationTest(SimpleTestCase):
    """Tests for preamble correlation."""

    def test_exact_preamble_correlates_to_one(self):
        preamble = preamble_code()
        self.assertEqual(correlate_preamble(preamble.chips.astype(float), preamble)[0], 1.0)

    def test_inverted_preamble_also_one(self):
        preamble = preamble_code()
        self.assertEqual(correlate_preamble(-preamble.chips.astype(float), preamble)[0], 1.0)

    def test_zero_energy_gives_zero(self):
        np.testing.assert_array_equal(correlate_preamble(np.zeros(200), preamble_code()), np.zeros(137))

    def test_output_range_on_noise(self):
        noise = np.random.default_rng(3).standard_normal(5000)
        values = correlate_preamble(noise, preamble_code())
        self.assertEqual(values.size, 5000 - 63)
        self.assertTrue(np.all((values >= 0) & (values <= 1)))

    def test_short_window_rejected(self):
        with self.assertRaises(ValueError):
            correlate_preamble(np.ones(10), preamble_code())

    def test_uses_real_part_only(self):
        chips = preamble_code().chips.astype(float)
        values = correlate_preamble(BasebandSignal(chips + 5j), preamble_code())
        self.assertEqual(values[0], 1.0)


class ReceiverTest(SimpleTestCase):
    """Tests for detection and decoding."""

    def detector(self, rows, **kwargs):
        kwargs.setdefault('threshold', 0.5)
        return default_detector(rows, **kwargs)

    def test_loopback_all_codes_and_lengths(self):
        """1,000 noiseless random frames over every code and length decode at the exact offset."""
        rng = np.random.default_rng(11)
        rows = assignable_rows(64)
        cfg = self.detector(rows)
        for trial in range(1000):
            row = rows[trial % len(rows)]
            frame = MacFrame(int(rng.integers(0, 256)), rng.integers(0, 256, size=trial % 16, dtype=np.uint8).tobytes())
            offset = int(rng.integers(0, 500))
            stream = place(build_packet_signal(frame, tx_config(row)), offset)
            events = detect_and_decode(stream, cfg)
            self.assertEqual(len(events), 1, f'trial {trial}')
            self.assertEqual(events[0].start_index, offset)
            self.assertEqual(events[0].matched_code_row, row)
            self.assertEqual(events[0].decoded, frame)

    def test_packet_across_window_boundary(self):
        frame = MacFrame(7, b'boundary')
        stream = place(build_packet_signal(frame, tx_config(4)), 990)
        events = detect_and_decode(stream, self.detector([4], window_samples=1000))
        self.assertEqual([(e.start_index, e.decoded) for e in events], [(990, frame)])

    def test_packet_train(self):
        frames = [MacFrame(i, bytes([i]) * i) for i in range(1, 5)]
        stream = place(build_packet_train(frames, 37, tx_config(12)), 300)
        events = detect_and_decode(stream, self.detector([12]))
        self.assertEqual([e.decoded for e in events], frames)

    def test_synchronous_ues_both_decode(self):
        """Two chip-aligned UEs sharing one preamble peak both decode."""
        a = build_packet_signal(MacFrame(0xA0, b'first'), tx_config(2))
        b = build_packet_signal(MacFrame(0xB0, b'second!'), tx_config(3))
        stream = superpose(
            [UePlacement(0, a, offset_samples=100), UePlacement(1, b, offset_samples=100)],
            100 + max(len(a), len(b)) + 64,
        )
        events = detect_and_decode(stream, self.detector([2, 3], resume_policy='preamble'))
        decoded = {e.matched_code_row: e.decoded for e in events if e.is_decoded}
        self.assertEqual(decoded, {2: MacFrame(0xA0, b'first'), 3: MacFrame(0xB0, b'second!')})

    def test_wrong_code_gives_undecoded_event(self):
        stream = place(build_packet_signal(MacFrame(1, b'x'), tx_config(5)), 200)
        events = detect_and_decode(stream, self.detector([6]))
        self.assertEqual(len(events), 1)
        self.assertFalse(events[0].is_decoded)
        self.assertEqual(events[0].start_index, 200)
        self.assertEqual(events[0].format_line(), 't=200 peak=1.0000 code=- addr=- len=- crc=fail')

    def test_no_row_decodes_under_another_row(self):
        """A packet on any row gives one undecoded event to a detector registered for a different row."""
        rows = assignable_rows(64)
        for index, row in enumerate(rows):
            other = rows[(index + 1) % len(rows)]
            frame = MacFrame(index, bytes([row]) * (index % 16))
            stream = place(build_packet_signal(frame, tx_config(row)), 200)
            with self.subTest(row=row, candidate=other):
                events = detect_and_decode(stream, self.detector([other]))
                self.assertEqual([(e.start_index, e.is_decoded) for e in events], [(200, False)])

    def test_body_that_looks_like_preamble(self):
        """Row 33 bodies correlate strongly with the preamble; still one event for a row-2 detector."""
        stream = place(build_packet_signal(MacFrame(1, b'x'), tx_config(33)), 200)
        events = detect_and_decode(stream, self.detector([2]))
        self.assertEqual(len(events), 1)
        self.assertFalse(events[0].is_decoded)

    def test_undecoded_lobe_fires_once(self):
        """A bare preamble (no body to decode) gives one event, not one per sample above threshold."""
        stream = place(BasebandSignal(preamble_code().chips.astype(float)), 500, tail=3000)
        events = detect_and_decode(stream, self.detector([2]))
        self.assertEqual([(e.start_index, e.is_decoded) for e in events], [(500, False)])

    def test_noise_only_decodes_nothing(self):
        noise = complex_awgn(50_000, 1.0, seed=5)
        events = detect_and_decode(BasebandSignal(noise), self.detector([2, 3], threshold=0.6))
        self.assertFalse(any(e.is_decoded for e in events))

    def test_residual_noise_is_squelched(self):
        """Noise 300 dB under the packet never crosses the threshold."""
        frame = MacFrame(3, b'quiet')
        clean = place(build_packet_signal(frame, tx_config(2)), 5000, tail=20_000)
        noisy = apply_awgn(clean, 300.0, seed=1)
        events = detect_and_decode(noisy, self.detector([2]))
        self.assertEqual([(e.start_index, e.decoded) for e in events], [(5000, frame)])

    def test_low_level_capture_decodes(self):
        """The squelch is relative to the stream, so a faint capture still decodes."""
        frame = MacFrame(0x2A, b'\x01\x02')
        faint = build_packet_signal(frame, TxConfig(ue_code=hadamard_row(64, 5), amplitude=1e-8))
        noisy = apply_awgn(place(faint, 700, tail=2000), 20.0, seed=6)
        events = detect_and_decode(noisy, self.detector([5], threshold=0.7))
        self.assertEqual([(e.start_index, e.decoded) for e in events], [(700, frame)])

    def test_start_found_away_from_peak(self):
        """The start is recovered from peaks several samples off, whatever the row."""
        for row in assignable_rows(64):
            frame = MacFrame(row, bytes([row, 255 - row]))
            real = place(build_packet_signal(frame, tx_config(row)), 100, tail=200).samples.real
            cfg = self.detector([row])
            for shift in (-32, -16, -8, -4, -1, 1, 4, 8, 16, 32):
                with self.subTest(row=row, shift=shift):
                    self.assertEqual(select_start(real, 100 + shift, cfg), 100)

    def test_start_found_at_zero_db(self):
        """Row 2 repeats every 4 chips; timing is still exact at 0 dB."""
        cfg = self.detector([2])
        clean = place(build_packet_signal(MacFrame(0x11, b'timing'), tx_config(2)), 300)
        exact = 0
        for seed in range(100):
            real = apply_awgn(clean, 0.0, seed=seed).samples.real
            exact += all(select_start(real, 300 + shift, cfg) == 300 for shift in (-8, -4, 4, 8))
        self.assertGreaterEqual(exact, 98)

    def test_back_to_back_packets(self):
        """With no gap, two empty-payload packets are found exactly 2,112 samples apart."""
        frames = [MacFrame(1), MacFrame(2)]
        stream = place(build_packet_train(frames, 0, tx_config(9)), 150)
        events = detect_and_decode(stream, self.detector([9]))
        self.assertEqual([e.start_index for e in events], [150, 150 + 2112])
        self.assertEqual([e.decoded for e in events], frames)

    def test_decodes_at_zero_db(self):
        frame = MacFrame(0x33, bytes(range(15)))
        clean = place(build_packet_signal(frame, tx_config(8)), 1000, tail=500)
        noisy = apply_awgn(clean, 0.0, seed=42)
        events = detect_and_decode(noisy, self.detector([8], threshold=0.6))
        self.assertIn(frame, [e.decoded for e in events if e.is_decoded])

    def test_windows_scanned(self):
        stats = {}
        detect_and_decode(BasebandSignal(np.zeros(25_000)), self.detector([2]), stats)
        self.assertEqual(stats['windows_scanned'], 3)

    def test_empty_stream_rejected(self):
        with self.assertRaises(ValueError):
            detect_and_decode(np.zeros(0), self.detector([2]))

    def test_demodulate_body_reads_length_field(self):
        frame_bits = encode_frame(0x01, b'abc')
        body = spread(frame_bits, hadamard_row(64, 7)).astype(float)
        padded = np.concatenate([body, np.ones(64 * 40)])
        np.testing.assert_array_equal(demodulate_body(padded, hadamard_row(64, 7)), frame_bits)

    def test_demodulate_body_survives_any_single_chip_flip(self):
        """One inverted chip leaves 62 of 64 in agreement, so every flip position still decodes."""
        code = hadamard_row(64, 21)
        frame = MacFrame(0x4D, b'flip')
        body = spread(encode_frame(frame.source_address, frame.payload), code).astype(float)
        for chip in range(body.size):
            flipped = body.copy()
            flipped[chip] = -flipped[chip]
            self.assertEqual(decode_frame(demodulate_body(flipped, code)), frame, f'chip {chip}')

    def test_demodulate_body_zeros(self):
        """All-zero body decides zeros, reads length 0 and fails the CRC."""
        bits = demodulate_body(np.zeros(64 * 40), hadamard_row(64, 7))
        np.testing.assert_array_equal(bits, np.zeros(32))
        self.assertFalse(decode_frame(bits))

    def test_demodulate_body_too_short(self):
        self.assertEqual(demodulate_body(np.ones(64 * 10), hadamard_row(64, 7)).size, 0)

    def test_detector_validation(self):
        with self.assertRaises(ValueError):
            self.detector([1])
        with self.assertRaises(ValueError):
            self.detector([2], threshold=0.0)
        with self.assertRaises(ValueError):
            self.detector([2], resume_policy='never')
        with self.assertRaises(ValueError):
            DetectorConfig(preamble_code(32), (hadamard_row(64, 2),), 0.5)

    def test_event_format_line(self):
        event = DetectionEvent(100, 0.98766, MacFrame(0x2A, b'\x01\x02'), 5)
        self.assertEqual(event.format_line(), 't=100 peak=0.9877 code=5 addr=0x2a len=2 crc=ok')

    def test_correlation_benchmark(self):
        """Throughput is reported, not gated."""
        rate = benchmark_correlation(10_000, repeats=5)
        self.assertGreater(rate, 0)
        print(f'\ncorrelation throughput: {rate:.3e} samples/s')


class ChannelTest(SimpleTestCase):
    """Tests for channel impairments."""

    def test_awgn_hits_target_sinr(self):
        clean = BasebandSignal(np.ones(1_000_000))
        for sinr_db in (-5.0, 0.0, 3.0, 10.0):
            with self.subTest(sinr_db=sinr_db):
                noisy = apply_awgn(clean, sinr_db, seed=derive_seed(9, int(sinr_db + 10)))
                self.assertAlmostEqual(measure_sinr_db(clean, noisy), sinr_db, delta=0.05)

    def test_awgn_references_nonzero_samples(self):
        """Leading and trailing silence does not dilute the signal power."""
        packet = build_packet_signal(MacFrame(1, bytes(15)), tx_config(2))
        clean = place(packet, 50_000, tail=50_000)
        noise = apply_awgn(clean, 0.0, seed=4).samples - clean.samples
        self.assertAlmostEqual(np.mean(np.abs(noise) ** 2), 1.0, delta=0.02)

    def test_explicit_reference_power(self):
        clean = BasebandSignal(2 * np.ones(200_000))
        noise = apply_awgn(clean, 0.0, seed=4, reference_power=1.0).samples - clean.samples
        self.assertAlmostEqual(np.mean(np.abs(noise) ** 2), 1.0, delta=0.02)

    def test_huge_sinr_is_transparent(self):
        clean = build_packet_signal(MacFrame(9, b'quiet'), tx_config(2))
        noisy = apply_awgn(clean, 300.0, seed=1)
        self.assertLess(np.max(np.abs(noisy.samples - clean.samples)), 1e-12)

    def test_awgn_deterministic(self):
        clean = BasebandSignal(np.ones(1000))
        np.testing.assert_array_equal(apply_awgn(clean, 0, seed=3).samples, apply_awgn(clean, 0, seed=3).samples)
        self.assertFalse(np.array_equal(apply_awgn(clean, 0, seed=3).samples, apply_awgn(clean, 0, seed=4).samples))

    def test_zero_power_rejected(self):
        with self.assertRaises(ValueError):
            apply_awgn(BasebandSignal(np.zeros(100)), 0.0, seed=0)

    def test_awgn_is_circular_gaussian(self):
        noise = complex_awgn(1_000_000, 1.0, seed=8)
        power = np.abs(noise) ** 2
        self.assertAlmostEqual(np.mean(power), 1.0, delta=0.01)
        kurtosis = np.mean(power ** 2) / np.mean(power) ** 2
        self.assertTrue(1.8 <= kurtosis <= 2.2, kurtosis)

    def test_ofdm_full_band_power_and_statistics(self):
        cfg = OfdmInterfererConfig(occupied_subcarriers=range(64), relative_power_db=0.0)
        samples = generate_ofdm_interferer(cfg, 1_000_000, seed=1).samples
        power = np.abs(samples) ** 2
        self.assertAlmostEqual(np.mean(power), 1.0, delta=0.01)
        kurtosis = np.mean(power ** 2) / np.mean(power) ** 2
        self.assertTrue(1.8 <= kurtosis <= 2.2, kurtosis)

    def test_ofdm_relative_power(self):
        cfg = OfdmInterfererConfig(occupied_subcarriers=range(1, 11), relative_power_db=-6.0)
        power = generate_ofdm_interferer(cfg, 1_000_000, seed=2).power()
        self.assertAlmostEqual(power / 10 ** -0.6, 1.0, delta=0.01)

    def test_single_subcarrier_is_constant_envelope(self):
        cfg = OfdmInterfererConfig(occupied_subcarriers=[8], relative_power_db=3.0)
        samples = generate_ofdm_interferer(cfg, 10_000, seed=3).samples
        np.testing.assert_allclose(np.abs(samples) ** 2, 10 ** 0.3, rtol=1e-9)

    def test_ofdm_length_and_cyclic_prefix(self):
        cfg = OfdmInterfererConfig(occupied_subcarriers=[3, 5, 7], cp_length=16)
        samples = generate_ofdm_interferer(cfg, 1000).samples
        self.assertEqual(samples.size, 1000)
        np.testing.assert_allclose(samples[:16], samples[64:80])

    def test_ofdm_deterministic_by_seed(self):
        cfg = OfdmInterfererConfig(occupied_subcarriers=[3, 5, 7], qpsk_seed=12)
        np.testing.assert_array_equal(generate_ofdm_interferer(cfg, 500).samples, generate_ofdm_interferer(cfg, 500).samples)

    def test_ofdm_config_validation(self):
        with self.assertRaises(ValueError):
            OfdmInterfererConfig(occupied_subcarriers=[])
        with self.assertRaises(ValueError):
            OfdmInterfererConfig(occupied_subcarriers=[64])
        with self.assertRaises(ValueError):
            OfdmInterfererConfig(occupied_subcarriers=[1], fft_size=48)

    def test_cancellation_scales_power(self):
        cfg = OfdmInterfererConfig(occupied_subcarriers=range(64))
        interferer = generate_ofdm_interferer(cfg, 100_000, seed=1)
        residual = apply_self_interference_cancellation(interferer, 30.0)
        self.assertAlmostEqual(residual.power() / interferer.power(), 1e-3, places=12)

    def test_channel_adds_residual_interferer(self):
        clean = place(build_packet_signal(MacFrame(2, bytes(15)), tx_config(2)), 0, tail=0)
        cfg = ChannelConfig(
            sinr_db=300.0,
            seed=1,
            interferer=OfdmInterfererConfig(occupied_subcarriers=range(64), relative_power_db=0.0),
            self_interference_cancellation_db=0.0,
        )
        residual = apply_channel(clean, cfg).samples - clean.samples
        self.assertAlmostEqual(np.mean(np.abs(residual) ** 2), 1.0, delta=0.1)

    def test_superpose(self):
        a = BasebandSignal(np.ones(10))
        b = BasebandSignal(np.ones(10))
        out = superpose([UePlacement(0, a, 0), UePlacement(1, b, 5, gain_db=20 * np.log10(2))], 20)
        np.testing.assert_allclose(out.samples.real[:5], 1)
        np.testing.assert_allclose(out.samples.real[5:10], 3)
        np.testing.assert_allclose(out.samples.real[10:15], 2)
        np.testing.assert_array_equal(out.samples[15:], 0)

    def test_superpose_overflow_rejected(self):
        with self.assertRaises(ValueError):
            superpose([UePlacement(0, BasebandSignal(np.ones(10)), 15)], 20)

    def test_seed_derivation(self):
        first = np.random.default_rng(derive_seed(1, 2, 3)).integers(0, 2 ** 32, 4)
        again = np.random.default_rng(derive_seed(1, 2, 3)).integers(0, 2 ** 32, 4)
        other = np.random.default_rng(derive_seed(1, 3, 2)).integers(0, 2 ** 32, 4)
        np.testing.assert_array_equal(first, again)
        self.assertFalse(np.array_equal(first, other))

    def test_child_seed_does_not_mutate(self):
        parent = derive_seed(5, 1)
        child_seed(parent, 0)
        child_seed(parent, 0)
        self.assertEqual(parent.n_children_spawned, 0)
        self.assertEqual(child_seed(parent, 0).spawn_key, (1, 0))


class IqFileTest(SimpleTestCase):
    """Tests for I/Q file I/O."""

    def setUp(self):
        self.tmp = tempfile.TemporaryDirectory()
        self.path = Path(self.tmp.name) / 'capture.iq'

    def tearDown(self):
        self.tmp.cleanup()

    def test_round_trip(self):
        signal = BasebandSignal(np.array([1 + 2j, -0.5 - 0.25j, 0j]), sample_rate_hz=2e6)
        self.assertEqual(write_iq(self.path, signal), 24)
        loaded = read_iq(self.path)
        np.testing.assert_array_equal(loaded.samples, signal.samples)
        self.assertEqual(loaded.sample_rate_hz, 2e6)

    def test_layout_is_interleaved_float32(self):
        write_iq(self.path, BasebandSignal(np.array([1 + 2j, 3 + 4j])))
        raw = np.frombuffer(self.path.read_bytes(), dtype='<f4')
        np.testing.assert_array_equal(raw, [1, 2, 3, 4])
        self.assertEqual(meta_path(self.path).read_text().strip(), 'sample_rate_hz=1000000.0')

    def test_truncated_file_rejected(self):
        self.path.write_bytes(b'\x00' * 12)
        with self.assertRaises(IqFormatError):
            read_iq(self.path)

    def test_empty_file_rejected(self):
        self.path.write_bytes(b'')
        with self.assertRaises(IqFormatError):
            read_iq(self.path)

    def test_missing_meta_defaults_rate(self):
        self.path.write_bytes(np.zeros(4, dtype='<f4').tobytes())
        with self.assertLogs('phy.iqfile', level='WARNING'):
            signal = read_iq(self.path)
        self.assertEqual(signal.sample_rate_hz, 1e6)
        self.assertEqual(len(signal), 2)

    def test_bad_meta_rejected(self):
        self.path.write_bytes(np.zeros(4, dtype='<f4').tobytes())
        meta_path(self.path).write_text('sample_rate_hz=fast\n')
        with self.assertRaises(IqFormatError):
            read_iq(self.path)

    def test_non_finite_samples_rejected(self):
        self.path.write_bytes(np.array([np.nan, 0], dtype='<f4').tobytes())
        meta_path(self.path).write_text('sample_rate_hz=1e6\n')
        with self.assertRaises(IqFormatError):
            read_iq(self.path)


class TxRxCommandTest(TestCase):
    """Tests for the tx and rx management commands."""

    def setUp(self):
        self.tmp = tempfile.TemporaryDirectory()
        self.dir = Path(self.tmp.name)

    def tearDown(self):
        self.tmp.cleanup()

    def call(self, *args):
        out, err = StringIO(), StringIO()
        call_command(*args, stdout=out, stderr=err)
        return out.getvalue()

    def test_tx_file_size(self):
        path = self.dir / 'p.iq'
        output = self.call('tx', '--addr', '0x2A', '--payload', '0x0102', '--code', '5', '--out', str(path))
        self.assertEqual(path.stat().st_size, 25_088)
        self.assertIn('3136 samples', output)
        self.assertIn('15625 bit/s', output)

    def test_tx_payload_too_long(self):
        with self.assertRaises(CommandError):
            self.call('tx', '--payload', '00' * 16, '--out', str(self.dir / 'p.iq'))

    def test_tx_reserved_code(self):
        for code in ('0', '1'):
            with self.subTest(code=code):
                with self.assertRaises(CommandError):
                    self.call('tx', '--code', code, '--out', str(self.dir / 'p.iq'))

    def test_tx_bad_hex(self):
        with self.assertRaises(CommandError):
            self.call('tx', '--payload', 'xyz', '--out', str(self.dir / 'p.iq'))

    def test_round_trip(self):
        path = self.dir / 'p.iq'
        self.call('tx', '--addr', '0x2A', '--payload', '0x0102', '--code', '5', '--out', str(path))
        output = self.call('rx', str(path), '--codes', '5', '--threshold', '0.5')
        lines = [line for line in output.splitlines() if 'crc=ok' in line]
        self.assertEqual(lines, ['t=0 peak=1.0000 code=5 addr=0x2a len=2 crc=ok'])

    def test_round_trip_packet_train_all_codes(self):
        path = self.dir / 'train.iq'
        self.call('tx', '--addr', '7', '--payload', 'cafe', '--code', '40', '--count', '3', '--gap', '250',
                  '--out', str(path))
        output = self.call('rx', str(path), '--threshold', '0.5')
        self.assertEqual(output.count('code=40 addr=0x07 len=2 crc=ok'), 3)

    def test_round_trip_with_noise(self):
        path = self.dir / 'noisy.iq'
        self.call('tx', '--payload', '0011223344', '--code', '9', '--noise-sinr-db', '10', '--seed', '3',
                  '--out', str(path))
        output = self.call('rx', str(path), '--codes', '9', '--threshold', '0.5')
        self.assertIn('code=9 addr=0x00 len=5 crc=ok', output)

    def test_rx_noise_only_exit_1(self):
        path = self.dir / 'noise.iq'
        write_iq(path, BasebandSignal(complex_awgn(30_000, 1.0, seed=6)))
        with self.assertRaises(CommandError) as ctx:
            self.call('rx', str(path), '--codes', '2,3', '--threshold', '0.6')
        self.assertEqual(ctx.exception.returncode, 1)

    def test_rx_truncated_exit_2(self):
        path = self.dir / 'bad.iq'
        path.write_bytes(b'\x00' * 13)
        with self.assertRaises(CommandError) as ctx:
            self.call('rx', str(path), '--threshold', '0.5')
        self.assertEqual(ctx.exception.returncode, 2)

    def test_rx_missing_file_exit_2(self):
        with self.assertRaises(CommandError) as ctx:
            self.call('rx', str(self.dir / 'nope.iq'), '--threshold', '0.5')
        self.assertEqual(ctx.exception.returncode, 2)

    def test_rx_auto_threshold_uses_cache(self):
        path = self.dir / 'p.iq'
        self.call('tx', '--payload', '01', '--code', '3', '--out', str(path))
        args = ('rx', str(path), '--codes', '3', '--fa-target', '0.01', '--calibration-windows', '1000',
                '--window', '1000')
        err = StringIO()
        call_command(*args, stdout=StringIO(), stderr=err)
        self.assertIn('(calibrated)', err.getvalue())
        err = StringIO()
        call_command(*args, stdout=StringIO(), stderr=err)
        self.assertIn('(cached)', err.getvalue())

    def test_version(self):
        self.assertEqual(UnderlayCommand().get_version(), __version__)
