"""
Scenario files: flat `key=value` lines, `#` starts a comment line, lists are
comma-separated and integer ranges are written `lo..hi`.

    master_seed=42
    n_ues=1
    payload_bytes=15
    sinr_grid_db=0,1,2,3,4,5

Keys are ScenarioConfig field names; the OFDM interferer is configured with
`interferer_`-prefixed OfdmInterfererConfig field names. Unknown keys are
rejected by name.
"""

from .forms import RANGE_SEPARATOR, ScenarioForm
from .harness import AUTO


class ConfigError(ValueError):
    """A scenario file that cannot be turned into a ScenarioConfig."""


KNOWN_KEYS = tuple(ScenarioForm.base_fields)


def parse_config_text(text, source='<config>'):
    """key=value lines to a dict of raw strings."""
    values = {}
    for number, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith('#'):
            continue
        key, sep, value = line.partition('=')
        key = key.strip()
        if not sep or not key:
            raise ConfigError(f'{source}:{number}: expected key=value, got {raw!r}')
        if key not in KNOWN_KEYS:
            raise ConfigError(f'{source}:{number}: unknown key {key!r}')
        if key in values:
            raise ConfigError(f'{source}:{number}: duplicate key {key!r}')
        values[key] = value.strip()
    return values


def scenario_from_values(values, source='<config>'):
    form = ScenarioForm(data=values)
    if not form.is_valid():
        problems = '; '.join(
            f'{field}: {" ".join(messages)}' if field != '__all__' else ' '.join(messages)
            for field, messages in form.errors.items()
        )
        raise ConfigError(f'{source}: {problems}')
    try:
        return form.to_scenario()
    except ValueError as exc:
        raise ConfigError(f'{source}: {exc}')


def parse_scenario(text, source='<config>'):
    return scenario_from_values(parse_config_text(text, source), source)


def _format_number(value):
    return repr(float(value)) if isinstance(value, float) else str(value)


def _format_range(pair):
    lo, hi = pair
    return str(lo) if lo == hi else f'{lo}{RANGE_SEPARATOR}{hi}'


def _format_list(values):
    return ','.join(_format_number(v) for v in values)


def serialize_scenario(cfg):
    """
    Every field of `cfg` as key=value lines, in form field order.
    parse_scenario(serialize_scenario(cfg)) == cfg.
    """
    lines = [
        f'master_seed={cfg.master_seed}',
        f'n_ues={cfg.n_ues}',
        f'payload_bytes={_format_range(cfg.payload_bytes)}',
        f'sinr_grid_db={_format_list(cfg.sinr_grid_db)}',
        f'trials_per_point={cfg.trials_per_point}',
        f'inter_packet_gap_samples={_format_range(cfg.inter_packet_gap_samples)}',
        f'asynchronous={str(cfg.asynchronous).lower()}',
        f'threshold={cfg.threshold if cfg.threshold == AUTO else repr(float(cfg.threshold))}',
        f'ue_rows={_format_list(cfg.ue_rows)}',
        f'ue_gain_db={_format_list(cfg.ue_gain_db)}',
        f'packets_per_trial={cfg.packets_per_trial}',
        f'window_samples={cfg.window_samples}',
        f'detection_tolerance_samples={cfg.detection_tolerance_samples}',
        f'samples_per_chip={cfg.samples_per_chip}',
        f'false_alarm_target={float(cfg.false_alarm_target)!r}',
        f'calibration_windows={cfg.calibration_windows}',
        f'calibration_seed={cfg.calibration_seed}',
        f'self_interference_cancellation_db={float(cfg.self_interference_cancellation_db)!r}',
    ]
    if cfg.relative_power_grid_db:
        lines.append(f'relative_power_grid_db={_format_list(cfg.relative_power_grid_db)}')
    if cfg.sweep_axis:
        lines.append(f'sweep_axis={cfg.sweep_axis}')
        lines.append(f'sweep_values={_format_list(cfg.sweep_values)}')
    lines.append(f'threads={cfg.threads}')
    if cfg.interferer is not None:
        interferer = cfg.interferer
        lines.extend([
            f'interferer_subcarriers={_format_list(interferer.occupied_subcarriers)}',
            f'interferer_relative_power_db={float(interferer.relative_power_db)!r}',
            f'interferer_fft_size={interferer.fft_size}',
            f'interferer_cp_length={interferer.cp_length}',
            f'interferer_qpsk_seed={interferer.qpsk_seed}',
        ])
    return '\n'.join(lines) + '\n'
