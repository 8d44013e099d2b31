from django.core.management.base import BaseCommand, CommandError

from cdma_underlay import __version__


class UnderlayCommand(BaseCommand):
    """Base for the simulator commands: project version and exit-code helpers."""

    # Exit status contract shared by tx/rx/sweep/calibrate
    EXIT_NOTHING_DECODED = 1
    EXIT_BAD_INPUT = 2

    def get_version(self):
        return __version__

    def fail(self, message, returncode=EXIT_BAD_INPUT):
        raise CommandError(message, returncode=returncode)


def parse_int(value):
    """Integer in any Python literal base (42, 0x2A, 0b101010)."""
    try:
        return int(str(value), 0)
    except ValueError:
        raise CommandError(f'Not an integer: {value!r}', returncode=UnderlayCommand.EXIT_BAD_INPUT)


def parse_hex_payload(value):
    """Hex string, optional 0x prefix, to bytes."""
    text = str(value).strip()
    if text[:2].lower() == '0x':
        text = text[2:]
    try:
        return bytes.fromhex(text)
    except ValueError:
        raise CommandError(f'Payload is not valid hex: {value!r}', returncode=UnderlayCommand.EXIT_BAD_INPUT)


def parse_rows(value):
    """Comma-separated code rows, e.g. '2,3,5'."""
    rows = [parse_int(part) for part in str(value).split(',') if part.strip()]
    if not rows:
        raise CommandError('No code rows given', returncode=UnderlayCommand.EXIT_BAD_INPUT)
    return rows
