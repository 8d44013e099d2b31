"""
Walsh-Hadamard spreading codes and chip-level spreading/despreading.

Codes are rows of the Sylvester (natural order) Hadamard matrix. Row 0 is the
all-ones DC sequence and is never assigned; row 1 is the shared preamble.
UEs get rows 2 and up.

Bit/symbol convention, shared with the modem: bit 0 -> +1, bit 1 -> -1.
"""
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
from scipy.linalg import hadamard

DEFAULT_ORDER = 64
MIN_ORDER = 2
MAX_ORDER = 4096

DC_ROW = 0
PREAMBLE_ROW = 1
RESERVED_ROWS = frozenset({DC_ROW, PREAMBLE_ROW})


def bits_to_symbols(bits):
    """Map bits to BPSK symbols: 0 -> +1, 1 -> -1."""
    bits = np.asarray(bits, dtype=np.int8)
    return 1 - 2 * bits


def hard_decide(metrics):
    """Soft metrics to bits. Negative decides 1; zero and positive decide 0."""
    return (np.asarray(metrics) < 0).astype(np.uint8)


def is_power_of_two(value):
    return value > 0 and (value & (value - 1)) == 0


@lru_cache(maxsize=None)
def hadamard_matrix(order):
    """Read-only Sylvester Hadamard matrix of the given order (int8, +/-1)."""
    if not isinstance(order, (int, np.integer)) or not is_power_of_two(int(order)):
        raise ValueError(f'Hadamard order must be a power of two, got {order!r}')
    if not MIN_ORDER <= order <= MAX_ORDER:
        raise ValueError(f'Hadamard order must be in [{MIN_ORDER}, {MAX_ORDER}], got {order}')
    matrix = hadamard(int(order), dtype=np.int8)
    matrix.setflags(write=False)
    return matrix


@dataclass(frozen=True, eq=False)
class SpreadingCode:
    """One Hadamard row in +/-1 chip form. Identity is (order, row_index)."""
    order: int
    row_index: int
    chips: np.ndarray = field(repr=False)

    def __eq__(self, other):
        if not isinstance(other, SpreadingCode):
            return NotImplemented
        return (self.order, self.row_index) == (other.order, other.row_index)

    def __hash__(self):
        return hash((self.order, self.row_index))

    def __lt__(self, other):
        return (self.order, self.row_index) < (other.order, other.row_index)

    @property
    def is_assignable(self):
        """Whether the row may be handed to a UE (not DC, not preamble)."""
        return self.row_index not in RESERVED_ROWS


def hadamard_row(order, row_index):
    """Row `row_index` of the Sylvester Hadamard matrix of `order`, as a SpreadingCode."""
    matrix = hadamard_matrix(order)
    if not isinstance(row_index, (int, np.integer)) or not 0 <= row_index < order:
        raise ValueError(f'Row index must be in [0, {order}), got {row_index!r}')
    return SpreadingCode(order=int(order), row_index=int(row_index), chips=matrix[row_index])


def preamble_code(order=DEFAULT_ORDER):
    return hadamard_row(order, PREAMBLE_ROW)


def assignable_rows(order=DEFAULT_ORDER):
    """Rows that can be assigned to UEs, ascending."""
    hadamard_matrix(order)
    return list(range(2, order))


def spread(bits, code):
    """
    Spread bits with a code.

    Bit k becomes symbol(bit) * code.chips, occupying chips
    [k*order, (k+1)*order) of the output.
    """
    bits = np.asarray(bits)
    if bits.size == 0:
        raise ValueError('Cannot spread an empty bit sequence')
    if np.any((bits != 0) & (bits != 1)):
        raise ValueError('Bits must be 0 or 1')
    symbols = bits_to_symbols(bits)
    return np.outer(symbols, code.chips.astype(np.int8)).ravel()


def integrate_chips(samples, samples_per_chip=1):
    """Average each chip's `samples_per_chip` samples down to one value per chip."""
    samples = np.asarray(samples, dtype=np.float64)
    if samples_per_chip == 1:
        return samples
    if samples.size % samples_per_chip:
        raise ValueError(
            f'Sample count {samples.size} is not a multiple of samples_per_chip={samples_per_chip}'
        )
    return samples.reshape(-1, samples_per_chip).mean(axis=1)


def despread(chips, code, samples_per_chip=1):
    """
    Correlate each group of `order` chips with the code.

    Returns one soft metric per bit: dot(group, code.chips) / order. Noiseless
    input yields exactly +1 / -1; a different row of the same matrix yields 0.
    """
    chips = integrate_chips(chips, samples_per_chip)
    if chips.size % code.order:
        raise ValueError(
            f'Chip count {chips.size} is not a multiple of code order {code.order}'
        )
    groups = chips.reshape(-1, code.order)
    return groups @ code.chips.astype(np.float64) / code.order
