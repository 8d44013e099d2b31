"""
MAC frame serialization.

Layout, MSB first within every field, in transmission order:

    address   8 bits
    length    4 bits   payload length in bytes, 0-15
    reserved  4 bits   always 0
    payload   8 * length bits
    crc      16 bits   CRC-16/CCITT-FALSE over everything before it

A 15-byte payload makes a 152-bit frame (9,728 chips after 64x spreading).

Corrupted air frames are a normal event: decode_frame reports them as an
IntegrityFailure value and never raises.
"""
from dataclasses import dataclass

import numpy as np

ADDRESS_BITS = 8
LENGTH_BITS = 4
RESERVED_BITS = 4
CRC_BITS = 16
HEADER_BITS = ADDRESS_BITS + LENGTH_BITS + RESERVED_BITS
MIN_FRAME_BITS = HEADER_BITS + CRC_BITS
MAX_PAYLOAD_BYTES = 15
MAX_ADDRESS = 0xFF

CRC16_POLY = 0x1021
CRC16_INIT = 0xFFFF


def _build_crc_table():
    table = []
    for byte in range(256):
        crc = byte << 8
        for _ in range(8):
            crc = ((crc << 1) ^ CRC16_POLY) if crc & 0x8000 else (crc << 1)
            crc &= 0xFFFF
        table.append(crc)
    return tuple(table)


CRC16_TABLE = _build_crc_table()


def bytes_to_bits(data):
    """Bytes to a uint8 bit array, MSB first."""
    return np.unpackbits(np.frombuffer(bytes(data), dtype=np.uint8))


def bits_to_bytes(bits):
    """Bit array (length a multiple of 8) to bytes, MSB first."""
    bits = np.asarray(bits, dtype=np.uint8)
    if bits.size % 8:
        raise ValueError(f'Bit count {bits.size} is not a multiple of 8')
    return np.packbits(bits).tobytes()


def _int_to_bits(value, width):
    return np.array([(value >> shift) & 1 for shift in range(width - 1, -1, -1)], dtype=np.uint8)


def _bits_to_int(bits):
    value = 0
    for bit in bits:
        value = (value << 1) | int(bit)
    return value


def crc16_ccitt_false(bits):
    """
    CRC-16/CCITT-FALSE (poly 0x1021, init 0xFFFF, no reflection, no final XOR)
    over a bit sequence, MSB first.

    Whole bytes go through the lookup table; a trailing partial byte is fed
    bit by bit, so any bit length is accepted.
    """
    bits = np.asarray(bits, dtype=np.uint8)
    whole = bits.size - bits.size % 8
    crc = CRC16_INIT
    for byte in np.packbits(bits[:whole]).tolist() if whole else ():
        crc = ((crc << 8) & 0xFFFF) ^ CRC16_TABLE[((crc >> 8) ^ byte) & 0xFF]
    for bit in bits[whole:].tolist():
        feedback = ((crc >> 15) & 1) ^ bit
        crc = (crc << 1) & 0xFFFF
        if feedback:
            crc ^= CRC16_POLY
    return crc


def frame_bit_length(payload_len):
    return MIN_FRAME_BITS + 8 * payload_len


@dataclass(frozen=True)
class MacFrame:
    """A decoded or to-be-sent uplink frame."""
    source_address: int
    payload: bytes = b''

    def __post_init__(self):
        if not isinstance(self.source_address, (int, np.integer)) or not 0 <= self.source_address <= MAX_ADDRESS:
            raise ValueError(f'Source address must be in [0, 255], got {self.source_address!r}')
        if len(self.payload) > MAX_PAYLOAD_BYTES:
            raise ValueError(
                f'Payload is {len(self.payload)} bytes; the length field allows at most {MAX_PAYLOAD_BYTES}'
            )
        object.__setattr__(self, 'payload', bytes(self.payload))

    @property
    def length(self):
        return len(self.payload)

    @property
    def bit_length(self):
        return frame_bit_length(self.length)

    @property
    def crc(self):
        return crc16_ccitt_false(_header_and_payload_bits(self.source_address, self.payload))


@dataclass(frozen=True)
class IntegrityFailure:
    """Why a bit sequence did not decode. Carries the CRCs on a mismatch."""
    reason: str
    expected_crc: int = None
    actual_crc: int = None

    def __bool__(self):
        return False


def _header_and_payload_bits(source_address, payload):
    return np.concatenate([
        _int_to_bits(source_address, ADDRESS_BITS),
        _int_to_bits(len(payload), LENGTH_BITS),
        np.zeros(RESERVED_BITS, dtype=np.uint8),
        bytes_to_bits(payload),
    ])


def encode_frame(source_address, payload):
    """Serialize a frame to its transmitted bits (32 + 8*len(payload) bits)."""
    frame = MacFrame(source_address, bytes(payload))
    body = _header_and_payload_bits(frame.source_address, frame.payload)
    return np.concatenate([body, _int_to_bits(crc16_ccitt_false(body), CRC_BITS)])


def parse_length_field(bits):
    """Payload length from the header bits of a (possibly corrupted) frame."""
    return _bits_to_int(bits[ADDRESS_BITS:ADDRESS_BITS + LENGTH_BITS])


def decode_frame(bits):
    """
    Parse frame bits. Returns a MacFrame when the length matches the length
    field exactly and the CRC checks, otherwise an IntegrityFailure.
    """
    bits = np.asarray(bits, dtype=np.uint8)
    if bits.size < MIN_FRAME_BITS:
        return IntegrityFailure('short')

    payload_len = parse_length_field(bits)
    expected_len = frame_bit_length(payload_len)
    if bits.size != expected_len:
        return IntegrityFailure('length')

    body = bits[:-CRC_BITS]
    received_crc = _bits_to_int(bits[-CRC_BITS:])
    computed_crc = crc16_ccitt_false(body)
    if received_crc != computed_crc:
        return IntegrityFailure('crc', expected_crc=computed_crc, actual_crc=received_crc)

    address = _bits_to_int(bits[:ADDRESS_BITS])
    payload = bits_to_bytes(body[HEADER_BITS:])
    return MacFrame(address, payload)


def format_frame(frame):
    """One CLI line per decoded frame."""
    return f'addr=0x{frame.source_address:02x} len={frame.length} payload={frame.payload.hex()} crc=ok'
