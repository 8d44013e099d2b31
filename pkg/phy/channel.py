"""
Channel impairments: AWGN at a target SINR, asynchronous multi-UE
superposition, a CP-OFDM/QPSK overlay interferer and the residual left by
self-interference cancellation at the base station.

SINR is measured over the full sample band against the mean power of the
nonzero (packet) samples. The channel is flat: no multipath, no frequency or
phase offset.

Every random draw comes from a numpy Generator seeded by an int or a
SeedSequence; derive_seed() turns (master seed, counters...) into an
independent stream so trials can run in any order.
"""
import logging
from dataclasses import dataclass, field

import numpy as np

from .modem import DEFAULT_SAMPLE_RATE_HZ, BasebandSignal
from .spreading import is_power_of_two

logger = logging.getLogger(__name__)

DEFAULT_SELF_INTERFERENCE_CANCELLATION_DB = 30.0


def derive_seed(master_seed, *counters):
    """Independent SeedSequence for (master_seed, counter, counter, ...)."""
    return np.random.SeedSequence(entropy=int(master_seed), spawn_key=tuple(int(c) for c in counters))


def child_seed(seed, index):
    """Sub-stream `index` of an int or SeedSequence seed, without mutating it."""
    if isinstance(seed, np.random.SeedSequence):
        return np.random.SeedSequence(seed.entropy, spawn_key=tuple(seed.spawn_key) + (int(index),))
    return derive_seed(seed, index)


def _rng(seed):
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.default_rng(seed)


def db_to_linear(value_db):
    return 10.0 ** (value_db / 10.0)


@dataclass(frozen=True)
class OfdmInterfererConfig:
    occupied_subcarriers: tuple
    relative_power_db: float = 0.0
    fft_size: int = 64
    cp_length: int = 16
    qpsk_seed: int = 0

    def __post_init__(self):
        occupied = tuple(sorted(set(int(k) for k in self.occupied_subcarriers)))
        if not occupied:
            raise ValueError('The OFDM interferer needs at least one occupied subcarrier')
        if not is_power_of_two(self.fft_size):
            raise ValueError(f'fft_size must be a power of two, got {self.fft_size}')
        if self.cp_length < 0:
            raise ValueError(f'cp_length must be nonnegative, got {self.cp_length}')
        out_of_range = [k for k in occupied if not 0 <= k < self.fft_size]
        if out_of_range:
            raise ValueError(f'Subcarriers {out_of_range} are outside [0, {self.fft_size})')
        object.__setattr__(self, 'occupied_subcarriers', occupied)

    @property
    def symbol_length(self):
        return self.fft_size + self.cp_length


@dataclass(frozen=True)
class ChannelConfig:
    sinr_db: float
    seed: int = 0
    interferer: OfdmInterfererConfig = None
    self_interference_cancellation_db: float = DEFAULT_SELF_INTERFERENCE_CANCELLATION_DB

    def __post_init__(self):
        if not np.isfinite(self.sinr_db):
            raise ValueError(f'sinr_db must be finite, got {self.sinr_db}')
        if self.self_interference_cancellation_db < 0:
            raise ValueError('self_interference_cancellation_db must be nonnegative')


@dataclass(frozen=True)
class UePlacement:
    ue_id: int
    signal: BasebandSignal = field(repr=False)
    offset_samples: int = 0
    gain_db: float = 0.0


def complex_awgn(length, noise_power, seed):
    """Circular complex Gaussian noise with E|n|^2 = noise_power."""
    rng = _rng(seed)
    scale = np.sqrt(noise_power / 2.0)
    return scale * (rng.standard_normal(length) + 1j * rng.standard_normal(length))


def apply_awgn(signal, sinr_db, seed, reference_power=None):
    """
    Add noise with variance P / 10^(sinr_db/10).

    P is the mean power of the signal's nonzero samples unless
    `reference_power` is given (multi-UE scenarios reference one UE).
    """
    power = signal.active_power() if reference_power is None else float(reference_power)
    if not power > 0:
        raise ValueError('SINR is undefined for a zero-power signal')
    noise_power = power / db_to_linear(sinr_db)
    noise = complex_awgn(len(signal), noise_power, seed)
    return signal.with_samples(signal.samples + noise)


def measure_sinr_db(clean, noisy):
    """SINR of `noisy` against `clean`, using clean's nonzero-sample power."""
    residual = noisy.with_samples(noisy.samples - clean.samples)
    return 10.0 * np.log10(clean.active_power() / residual.power())


def superpose(placements, total_length, sample_rate_hz=DEFAULT_SAMPLE_RATE_HZ):
    """Sum of gain-scaled, offset signals in a stream of `total_length` samples."""
    if total_length < 1:
        raise ValueError(f'total_length must be positive, got {total_length}')
    out = np.zeros(total_length, dtype=np.complex128)
    for placement in placements:
        end = placement.offset_samples + len(placement.signal)
        if placement.offset_samples < 0 or end > total_length:
            raise ValueError(
                f'UE {placement.ue_id} occupies [{placement.offset_samples}, {end}) '
                f'which does not fit in {total_length} samples'
            )
        gain = 10.0 ** (placement.gain_db / 20.0)
        out[placement.offset_samples:end] += gain * placement.signal.samples
    return BasebandSignal(out, sample_rate_hz)


def generate_ofdm_interferer(cfg, length, sample_rate_hz=DEFAULT_SAMPLE_RATE_HZ, seed=None):
    """
    CP-OFDM symbols with unit-power QPSK on the occupied subcarriers.

    Scaled so the useful part of each symbol has mean power
    10^(relative_power_db/10) against a unit-power IoT signal. `seed`
    overrides cfg.qpsk_seed (used for per-trial streams).
    """
    if length < 1:
        raise ValueError(f'length must be positive, got {length}')
    rng = _rng(cfg.qpsk_seed if seed is None else seed)
    n_symbols = -(-length // cfg.symbol_length)
    occupied = np.asarray(cfg.occupied_subcarriers)

    bits = rng.integers(0, 2, size=(n_symbols, occupied.size, 2))
    qpsk = ((1 - 2 * bits[..., 0]) + 1j * (1 - 2 * bits[..., 1])) / np.sqrt(2.0)
    grid = np.zeros((n_symbols, cfg.fft_size), dtype=np.complex128)
    grid[:, occupied] = qpsk

    scale = cfg.fft_size / np.sqrt(occupied.size) * np.sqrt(db_to_linear(cfg.relative_power_db))
    symbols = np.fft.ifft(grid, axis=1) * scale
    if cfg.cp_length:
        symbols = np.concatenate([symbols[:, -cfg.cp_length:], symbols], axis=1)
    return BasebandSignal(symbols.ravel()[:length], sample_rate_hz)


def apply_self_interference_cancellation(interferer, cancellation_db):
    """Residual after cancellation: amplitude scaled by 10^(-cancellation_db/20)."""
    if cancellation_db < 0:
        raise ValueError(f'cancellation_db must be nonnegative, got {cancellation_db}')
    return interferer.with_samples(interferer.samples * 10.0 ** (-cancellation_db / 20.0))


def apply_channel(signal, cfg, reference_power=None):
    """
    Full impairment chain for one stream: residual OFDM interference (if
    configured) and AWGN at cfg.sinr_db.
    """
    noise_seed, interferer_seed = child_seed(cfg.seed, 0), child_seed(cfg.seed, 1)
    samples = signal.samples
    if cfg.interferer is not None:
        interferer = generate_ofdm_interferer(cfg.interferer, len(signal), signal.sample_rate_hz, interferer_seed)
        residual = apply_self_interference_cancellation(interferer, cfg.self_interference_cancellation_db)
        samples = samples + residual.samples
    reference = signal.active_power() if reference_power is None else reference_power
    return apply_awgn(signal.with_samples(samples), cfg.sinr_db, noise_seed, reference_power=reference)
