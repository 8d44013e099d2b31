"""
Transmit chain: MacFrame -> preamble + spread BPSK body as complex baseband.

Chips are rectangular, `samples_per_chip` samples each (1 by default, so the
chip rate equals the 1 MSps sample rate). Output is purely real; the
imaginary part only picks up noise and interference in the channel.
"""
from dataclasses import dataclass, field

import numpy as np

from .framing import encode_frame, frame_bit_length
from .spreading import DEFAULT_ORDER, PREAMBLE_ROW, RESERVED_ROWS, SpreadingCode, hadamard_row, spread

DEFAULT_SAMPLE_RATE_HZ = 1e6


@dataclass(frozen=True, eq=False)
class BasebandSignal:
    """Finite complex sample sequence at a declared sample rate."""
    samples: np.ndarray
    sample_rate_hz: float = DEFAULT_SAMPLE_RATE_HZ

    def __post_init__(self):
        samples = np.asarray(self.samples, dtype=np.complex128)
        if samples.ndim != 1:
            raise ValueError('Samples must be one-dimensional')
        if not np.all(np.isfinite(samples)):
            raise ValueError('Samples must be finite (no NaN/Inf)')
        if not self.sample_rate_hz > 0:
            raise ValueError(f'Sample rate must be positive, got {self.sample_rate_hz}')
        samples.setflags(write=False)
        object.__setattr__(self, 'samples', samples)

    def __len__(self):
        return self.samples.size

    def power(self):
        """Mean per-sample power over the whole signal."""
        if not len(self):
            return 0.0
        return float(np.mean(np.abs(self.samples) ** 2))

    def active_power(self):
        """Mean per-sample power over the nonzero samples only (0.0 if none)."""
        active = self.samples[self.samples != 0]
        if not active.size:
            return 0.0
        return float(np.mean(np.abs(active) ** 2))

    def with_samples(self, samples):
        return BasebandSignal(samples, self.sample_rate_hz)


@dataclass(frozen=True)
class TxConfig:
    ue_code: SpreadingCode
    preamble_code: SpreadingCode = field(default_factory=lambda: hadamard_row(DEFAULT_ORDER, PREAMBLE_ROW))
    samples_per_chip: int = 1
    amplitude: float = 1.0

    def __post_init__(self):
        if self.ue_code.order != self.preamble_code.order:
            raise ValueError(
                f'UE code order {self.ue_code.order} differs from preamble order {self.preamble_code.order}'
            )
        if self.ue_code.row_index in RESERVED_ROWS:
            raise ValueError(f'Row {self.ue_code.row_index} is reserved and cannot be assigned to a UE')
        if self.preamble_code.row_index != PREAMBLE_ROW:
            raise ValueError(f'Preamble must use row {PREAMBLE_ROW}, got {self.preamble_code.row_index}')
        if not isinstance(self.samples_per_chip, (int, np.integer)) or self.samples_per_chip < 1:
            raise ValueError(f'samples_per_chip must be a positive integer, got {self.samples_per_chip!r}')
        if not self.amplitude > 0:
            raise ValueError(f'Amplitude must be positive, got {self.amplitude}')

    @property
    def order(self):
        return self.ue_code.order

    @property
    def preamble_samples(self):
        return self.order * self.samples_per_chip


def packet_length_samples(payload_len, order=DEFAULT_ORDER, samples_per_chip=1):
    """(order + order * frame bits) * samples_per_chip."""
    return (order + order * frame_bit_length(payload_len)) * samples_per_chip


def _chips_to_samples(chips, cfg):
    samples = np.repeat(np.asarray(chips, dtype=np.float64), cfg.samples_per_chip)
    return samples * cfg.amplitude


def build_packet_signal(frame, cfg, sample_rate_hz=DEFAULT_SAMPLE_RATE_HZ):
    """Preamble chips followed by the frame bits spread with the UE code."""
    bits = encode_frame(frame.source_address, frame.payload)
    chips = np.concatenate([cfg.preamble_code.chips, spread(bits, cfg.ue_code)])
    return BasebandSignal(_chips_to_samples(chips, cfg).astype(np.complex128), sample_rate_hz)


def build_packet_train(frames, inter_packet_gap_samples, cfg, sample_rate_hz=DEFAULT_SAMPLE_RATE_HZ):
    """
    Packets back to back with `inter_packet_gap_samples` zeros between them.

    The gap may be a single integer or one integer per gap (len(frames) - 1).
    """
    frames = list(frames)
    if not frames:
        raise ValueError('A packet train needs at least one frame')
    gaps = np.broadcast_to(np.asarray(inter_packet_gap_samples, dtype=np.int64), (len(frames) - 1,))
    if np.any(gaps < 0):
        raise ValueError('Inter-packet gap must be nonnegative')

    pieces = []
    for index, frame in enumerate(frames):
        if index:
            pieces.append(np.zeros(int(gaps[index - 1]), dtype=np.complex128))
        pieces.append(build_packet_signal(frame, cfg, sample_rate_hz).samples)
    return BasebandSignal(np.concatenate(pieces), sample_rate_hz)


def nominal_bit_rate(cfg, sample_rate_hz=DEFAULT_SAMPLE_RATE_HZ):
    """Data bits per second: one bit per `order` chips."""
    return sample_rate_hz / (cfg.samples_per_chip * cfg.order)
