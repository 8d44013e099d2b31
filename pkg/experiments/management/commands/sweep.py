"""
Run the scenario in a config file and write its results as CSV.
Usage: python manage.py sweep fixtures/single_link.cfg --out single.csv --threads 8
"""
from pathlib import Path

from django.conf import settings

from experiments.calibration import cached_calibrator
from experiments.configfile import ConfigError, parse_config_text, scenario_from_values
from experiments.harness import run_scenario
from experiments.persistence import save_sweep
from experiments.results import write_csv
from phy.management.base import UnderlayCommand


class Command(UnderlayCommand):
    help = 'Run a Monte Carlo sweep from a scenario file and write CSV results'

    def add_arguments(self, parser):
        parser.add_argument('config', type=str, help='Scenario file (key=value lines)')
        parser.add_argument('--out', type=str, default=None, help='CSV output path (default: stdout)')
        parser.add_argument('--threads', type=int, default=None, help='Worker threads; output does not depend on it')
        parser.add_argument('--seed', type=int, default=None, help='Override master_seed')
        parser.add_argument('--trials', type=int, default=None, help='Override trials_per_point')
        parser.add_argument('--save', action='store_true', help='Store the run in the database')
        parser.add_argument('--name', type=str, default='', help='Name for the stored run')

    def handle(self, *args, **options):
        path = Path(options['config'])
        try:
            values = parse_config_text(path.read_text(), str(path))
        except OSError as exc:
            self.fail(f'Cannot read {path}: {exc}')
        except ConfigError as exc:
            self.fail(str(exc))

        if options['seed'] is not None:
            values['master_seed'] = str(options['seed'])
        if options['trials'] is not None:
            values['trials_per_point'] = str(options['trials'])
        if options['threads'] is not None:
            values['threads'] = str(options['threads'])
        elif 'threads' not in values:
            values['threads'] = str(settings.UNDERLAY_THREADS)

        try:
            cfg = scenario_from_values(values, str(path))
        except ConfigError as exc:
            self.fail(str(exc))

        self.stderr.write(f'{cfg.kind} sweep, {len(cfg.sinr_grid_db)} SINR points, '
                          f'{cfg.trials_per_point} trials/point, {cfg.threads} thread(s)')
        try:
            result = run_scenario(cfg, calibrate=cached_calibrator)
        except ValueError as exc:
            self.fail(str(exc))

        for point in result.points:
            self.stderr.write(point.summary())

        if options['out']:
            try:
                with open(options['out'], 'w', newline='') as handle:
                    write_csv(result, handle)
            except OSError as exc:
                self.fail(f"Cannot write {options['out']}: {exc}")
            self.stderr.write(self.style.SUCCESS(f"Wrote {len(result.points)} rows to {options['out']}"))
        else:
            write_csv(result, self.stdout)

        if options['save']:
            run = save_sweep(cfg, result, name=options['name'])
            self.stderr.write(self.style.SUCCESS(f'Saved as run #{run.pk}'))
