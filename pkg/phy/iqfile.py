"""
Raw I/Q sample files.

The payload is headerless interleaved little-endian float32 pairs (I then Q),
the layout SDR tools read and write natively. The sample rate lives in a
sidecar `<path>.meta` text file with one `sample_rate_hz=<real>` line.
"""
import logging
from pathlib import Path

import numpy as np

from .modem import DEFAULT_SAMPLE_RATE_HZ, BasebandSignal

logger = logging.getLogger(__name__)

SAMPLE_DTYPE = np.dtype('<f4')
BYTES_PER_SAMPLE = 2 * SAMPLE_DTYPE.itemsize
META_SUFFIX = '.meta'


class IqFormatError(ValueError):
    """The file is not a valid I/Q sample file."""


def meta_path(path):
    path = Path(path)
    return path.with_name(path.name + META_SUFFIX)


def write_iq(path, signal):
    """Write a BasebandSignal and its sidecar. Returns the number of bytes written."""
    interleaved = np.empty(2 * len(signal), dtype=SAMPLE_DTYPE)
    interleaved[0::2] = signal.samples.real
    interleaved[1::2] = signal.samples.imag
    data = interleaved.tobytes()
    Path(path).write_bytes(data)
    meta_path(path).write_text(f'sample_rate_hz={signal.sample_rate_hz!r}\n')
    return len(data)


def _read_sample_rate(path):
    meta = meta_path(path)
    if not meta.exists():
        logger.warning('No %s next to %s; assuming %g Hz', meta.name, path, DEFAULT_SAMPLE_RATE_HZ)
        return DEFAULT_SAMPLE_RATE_HZ

    for line in meta.read_text().splitlines():
        line = line.strip()
        if not line or line.startswith('#'):
            continue
        key, sep, value = line.partition('=')
        if not sep:
            raise IqFormatError(f'{meta}: expected key=value, got {line!r}')
        if key.strip() != 'sample_rate_hz':
            continue
        try:
            rate = float(value)
        except ValueError:
            raise IqFormatError(f'{meta}: sample_rate_hz is not a number: {value.strip()!r}')
        if not np.isfinite(rate) or rate <= 0:
            raise IqFormatError(f'{meta}: sample_rate_hz must be positive, got {rate}')
        return rate
    raise IqFormatError(f'{meta}: missing sample_rate_hz')


def read_iq(path):
    """
    Read an I/Q file back into a BasebandSignal.

    Raises IqFormatError when the byte count is not a whole number of
    samples or the data holds NaN/Inf. OSError propagates for unreadable
    paths.
    """
    data = Path(path).read_bytes()
    if len(data) % BYTES_PER_SAMPLE:
        raise IqFormatError(
            f'{path}: {len(data)} bytes is not a multiple of {BYTES_PER_SAMPLE} (one I/Q float32 pair)'
        )
    if not data:
        raise IqFormatError(f'{path}: file holds no samples')

    interleaved = np.frombuffer(data, dtype=SAMPLE_DTYPE).astype(np.float64)
    samples = interleaved[0::2] + 1j * interleaved[1::2]
    sample_rate_hz = _read_sample_rate(path)
    try:
        return BasebandSignal(samples, sample_rate_hz)
    except ValueError as exc:
        raise IqFormatError(f'{path}: {exc}')
