"""
Measure single-threaded preamble-correlation throughput.
Usage: python manage.py benchmark --window 10000 --repeats 200
"""
from django.conf import settings

from phy.management.base import UnderlayCommand
from phy.receiver import benchmark_correlation
from phy.spreading import preamble_code


class Command(UnderlayCommand):
    help = 'Report correlation throughput against the real-time sample rate'

    def add_arguments(self, parser):
        parser.add_argument('--window', type=int, default=None, help='Samples per window')
        parser.add_argument('--repeats', type=int, default=100)
        parser.add_argument('--seed', type=int, default=0)

    def handle(self, *args, **options):
        window = options['window'] or settings.UNDERLAY_WINDOW_SAMPLES
        if window < 1 or options['repeats'] < 1:
            self.fail('--window and --repeats must be positive')

        rate = benchmark_correlation(
            window,
            repeats=options['repeats'],
            seed=options['seed'],
            preamble=preamble_code(settings.UNDERLAY_SPREADING_ORDER),
        )
        budget_us = window / settings.UNDERLAY_SAMPLE_RATE_HZ * 1e6
        spent_us = window / rate * 1e6
        self.stdout.write(f'{rate:.3e} samples/s ({spent_us:.0f} us per {window}-sample window, budget {budget_us:.0f} us)')
        if rate >= settings.UNDERLAY_SAMPLE_RATE_HZ:
            self.stdout.write(self.style.SUCCESS('Faster than real time'))
        else:
            self.stdout.write(self.style.WARNING('Slower than real time'))
