"""
Scan an I/Q file for uplink packets and print one line per detection.
Usage: python manage.py rx p.iq --codes 5 --threshold 0.5

Exit status: 0 if at least one frame decoded, 1 if none, 2 on a bad file or
bad arguments.
"""
from django.conf import settings

from experiments.calibration import get_or_calibrate_threshold
from phy.iqfile import IqFormatError, read_iq
from phy.management.base import UnderlayCommand, parse_rows
from phy.receiver import DEFAULT_DETECTION_TOLERANCE, default_detector, detect_and_decode
from phy.spreading import assignable_rows


class Command(UnderlayCommand):
    help = 'Detect and decode uplink packets in an I/Q file'

    def add_arguments(self, parser):
        parser.add_argument('path', type=str, help='I/Q file written by tx or an SDR capture')
        parser.add_argument(
            '--codes',
            type=str,
            default=None,
            help='Comma-separated candidate code rows (default: every assignable row)'
        )
        parser.add_argument(
            '--threshold',
            type=str,
            default='auto',
            help='Normalized correlation threshold in (0, 1], or "auto" to calibrate on noise'
        )
        parser.add_argument('--fa-target', type=float, default=None, help='False alarms per window for auto')
        parser.add_argument('--calibration-windows', type=int, default=None)
        parser.add_argument('--seed', type=int, default=None, help='Calibration noise seed for auto')
        parser.add_argument('--window', type=int, default=None, help='Samples per scan window')
        parser.add_argument('--tolerance', type=int, default=DEFAULT_DETECTION_TOLERANCE)
        parser.add_argument('--samples-per-chip', type=int, default=1)

    def handle(self, *args, **options):
        order = settings.UNDERLAY_SPREADING_ORDER
        window = options['window'] or settings.UNDERLAY_WINDOW_SAMPLES
        rows = parse_rows(options['codes']) if options['codes'] else assignable_rows(order)

        try:
            signal = read_iq(options['path'])
        except (OSError, IqFormatError) as exc:
            self.fail(f"Cannot read {options['path']}: {exc}")

        threshold = self._threshold(options, order, window)
        try:
            cfg = default_detector(
                rows,
                threshold,
                order=order,
                window_samples=window,
                detection_tolerance_samples=options['tolerance'],
                samples_per_chip=options['samples_per_chip'],
            )
        except ValueError as exc:
            self.fail(str(exc))

        events = detect_and_decode(signal, cfg)
        for event in events:
            self.stdout.write(event.format_line())

        decoded = sum(1 for event in events if event.is_decoded)
        if not decoded:
            self.fail(f'No frame decoded ({len(events)} detections)', returncode=self.EXIT_NOTHING_DECODED)
        self.stdout.write(self.style.SUCCESS(f'{decoded} frame(s) decoded'))

    def _threshold(self, options, order, window):
        if options['threshold'] != 'auto':
            try:
                return float(options['threshold'])
            except ValueError:
                self.fail(f"--threshold must be a number or 'auto', got {options['threshold']!r}")

        try:
            threshold, created = get_or_calibrate_threshold(
                order=order,
                window_samples=window,
                false_alarm_target=options['fa_target'] or settings.UNDERLAY_FA_TARGET,
                n_noise_windows=options['calibration_windows'] or settings.UNDERLAY_CALIBRATION_WINDOWS,
                seed=settings.UNDERLAY_CALIBRATION_SEED if options['seed'] is None else options['seed'],
                samples_per_chip=options['samples_per_chip'],
            )
        except ValueError as exc:
            self.fail(str(exc))
        source = 'calibrated' if created else 'cached'
        self.stderr.write(self.style.NOTICE(f'Threshold {threshold:.4f} ({source})'))
        return threshold
