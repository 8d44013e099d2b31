"""
Calibrate the detection threshold on noise for a false-alarm target.
Usage: python manage.py calibrate --window 10000 --fa-target 1e-4 --seed 1
"""
from django.conf import settings

from experiments.calibration import get_or_calibrate_threshold
from phy.management.base import UnderlayCommand


class Command(UnderlayCommand):
    help = 'Pick a preamble-correlation threshold from noise-only windows'

    def add_arguments(self, parser):
        parser.add_argument('--window', type=int, default=None, help='Samples per window')
        parser.add_argument('--fa-target', type=float, default=None, help='False alarms per window')
        parser.add_argument('--windows', type=int, default=None, help='Number of noise windows')
        parser.add_argument('--seed', type=int, default=None)
        parser.add_argument('--samples-per-chip', type=int, default=1)

    def handle(self, *args, **options):
        window = options['window'] or settings.UNDERLAY_WINDOW_SAMPLES
        target = options['fa_target'] or settings.UNDERLAY_FA_TARGET
        n_windows = options['windows'] or settings.UNDERLAY_CALIBRATION_WINDOWS
        seed = settings.UNDERLAY_CALIBRATION_SEED if options['seed'] is None else options['seed']

        try:
            threshold, created = get_or_calibrate_threshold(
                order=settings.UNDERLAY_SPREADING_ORDER,
                window_samples=window,
                false_alarm_target=target,
                n_noise_windows=n_windows,
                seed=seed,
                samples_per_chip=options['samples_per_chip'],
            )
        except ValueError as exc:
            self.fail(str(exc))

        if not created:
            self.stderr.write(self.style.NOTICE('Already calibrated; using the stored value'))
        self.stdout.write(f'threshold={threshold:.6f}')
