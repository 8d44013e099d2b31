"""
Build an uplink packet (or packet train) and write it as an I/Q file.
Usage: python manage.py tx --addr 0x2A --payload 0x0102 --code 5 --out p.iq
"""
from django.conf import settings

from phy.channel import apply_awgn, derive_seed
from phy.framing import MacFrame
from phy.iqfile import write_iq
from phy.management.base import UnderlayCommand, parse_hex_payload, parse_int
from phy.modem import TxConfig, build_packet_train, nominal_bit_rate, packet_length_samples
from phy.spreading import hadamard_row, preamble_code


class Command(UnderlayCommand):
    help = 'Write a spread BPSK uplink packet train to an I/Q file'

    def add_arguments(self, parser):
        parser.add_argument('--addr', type=str, default='0x00', help='Source address, 0-255 (hex or decimal)')
        parser.add_argument('--payload', type=str, default='', help='Payload as hex, at most 15 bytes')
        parser.add_argument('--code', type=str, default='2', help='Hadamard row of the UE code (2 or higher)')
        parser.add_argument('--gap', type=int, default=0, help='Zero samples between packets')
        parser.add_argument('--count', type=int, default=1, help='Number of packets in the train')
        parser.add_argument('--samples-per-chip', type=int, default=1)
        parser.add_argument('--out', type=str, required=True, help='Output I/Q file path')
        parser.add_argument(
            '--noise-sinr-db',
            type=float,
            default=None,
            help='Add AWGN at this SINR before writing (default: noiseless)'
        )
        parser.add_argument('--seed', type=int, default=0, help='Noise seed (with --noise-sinr-db)')

    def handle(self, *args, **options):
        order = settings.UNDERLAY_SPREADING_ORDER
        sample_rate_hz = settings.UNDERLAY_SAMPLE_RATE_HZ
        if options['count'] < 1:
            self.fail(f"--count must be at least 1, got {options['count']}")

        try:
            frame = MacFrame(parse_int(options['addr']), parse_hex_payload(options['payload']))
            cfg = TxConfig(
                ue_code=hadamard_row(order, parse_int(options['code'])),
                preamble_code=preamble_code(order),
                samples_per_chip=options['samples_per_chip'],
            )
            signal = build_packet_train([frame] * options['count'], options['gap'], cfg, sample_rate_hz)
        except ValueError as exc:
            self.fail(str(exc))

        if options['noise_sinr_db'] is not None:
            signal = apply_awgn(signal, options['noise_sinr_db'], derive_seed(options['seed']))

        try:
            written = write_iq(options['out'], signal)
        except OSError as exc:
            self.fail(f"Cannot write {options['out']}: {exc}")

        self.stdout.write(
            f'{len(signal)} samples ({written} bytes, '
            f'{packet_length_samples(frame.length, order, cfg.samples_per_chip)} per packet) '
            f"written to {options['out']}"
        )
        self.stdout.write(self.style.SUCCESS(f'Nominal bit rate: {nominal_bit_rate(cfg, sample_rate_hz):g} bit/s'))
