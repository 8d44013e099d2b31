from django import forms

from phy.channel import OfdmInterfererConfig
from phy.framing import MAX_PAYLOAD_BYTES

from .harness import AUTO, MAX_SEED, MAX_UES, SWEEP_AXES, ScenarioConfig

RANGE_SEPARATOR = '..'


def _split_list(value):
    return [part.strip() for part in value.split(',') if part.strip()]


def _parse_range(value, label):
    """'7' or '1..15' to an int or an inclusive (lo, hi) pair."""
    lo, sep, hi = value.partition(RANGE_SEPARATOR)
    try:
        if not sep:
            return int(lo)
        return int(lo), int(hi)
    except ValueError:
        raise forms.ValidationError(f'{label} must be an integer or lo{RANGE_SEPARATOR}hi, got {value!r}')


class ScenarioForm(forms.Form):
    """
    Validates the raw strings of a scenario file. Only master_seed is
    required; anything left out keeps the ScenarioConfig default.
    """

    master_seed = forms.IntegerField(min_value=0, max_value=MAX_SEED)
    n_ues = forms.IntegerField(required=False, min_value=1, max_value=MAX_UES)
    payload_bytes = forms.CharField(required=False, help_text=f'Bytes, or lo{RANGE_SEPARATOR}hi')
    sinr_grid_db = forms.CharField(required=False, help_text='Comma-separated, ascending')
    trials_per_point = forms.IntegerField(required=False, min_value=1)
    inter_packet_gap_samples = forms.CharField(required=False, help_text=f'Samples, or lo{RANGE_SEPARATOR}hi')
    asynchronous = forms.NullBooleanField(required=False)
    threshold = forms.CharField(required=False, help_text="Real in (0, 1] or 'auto'")
    ue_rows = forms.CharField(required=False)
    ue_gain_db = forms.CharField(required=False)
    packets_per_trial = forms.IntegerField(required=False, min_value=1)
    window_samples = forms.IntegerField(required=False, min_value=1)
    detection_tolerance_samples = forms.IntegerField(required=False, min_value=0)
    samples_per_chip = forms.IntegerField(required=False, min_value=1)
    false_alarm_target = forms.FloatField(required=False)
    calibration_windows = forms.IntegerField(required=False, min_value=1)
    calibration_seed = forms.IntegerField(required=False, min_value=0, max_value=MAX_SEED)
    self_interference_cancellation_db = forms.FloatField(required=False, min_value=0)
    relative_power_grid_db = forms.CharField(required=False)
    sweep_axis = forms.ChoiceField(required=False, choices=[('', '---')] + [(axis, axis) for axis in SWEEP_AXES])
    sweep_values = forms.CharField(required=False)
    threads = forms.IntegerField(required=False, min_value=1)

    # OFDM interferer; present when interferer_subcarriers is set
    interferer_subcarriers = forms.CharField(required=False)
    interferer_relative_power_db = forms.FloatField(required=False)
    interferer_fft_size = forms.IntegerField(required=False, min_value=2)
    interferer_cp_length = forms.IntegerField(required=False, min_value=0)
    interferer_qpsk_seed = forms.IntegerField(required=False, min_value=0)

    def _float_list(self, name):
        value = self.cleaned_data.get(name)
        if not value:
            return None
        try:
            return tuple(float(part) for part in _split_list(value))
        except ValueError:
            raise forms.ValidationError(f'{name} must be a comma-separated list of numbers')

    def _int_list(self, name):
        value = self.cleaned_data.get(name)
        if not value:
            return None
        try:
            return tuple(int(part) for part in _split_list(value))
        except ValueError:
            raise forms.ValidationError(f'{name} must be a comma-separated list of integers')

    def clean_payload_bytes(self):
        value = self.cleaned_data.get('payload_bytes')
        if not value:
            return None
        parsed = _parse_range(value, 'payload_bytes')
        bounds = parsed if isinstance(parsed, tuple) else (parsed, parsed)
        if not 0 <= bounds[0] <= bounds[1] <= MAX_PAYLOAD_BYTES:
            raise forms.ValidationError(f'payload_bytes must lie in [0, {MAX_PAYLOAD_BYTES}]')
        return parsed

    def clean_inter_packet_gap_samples(self):
        value = self.cleaned_data.get('inter_packet_gap_samples')
        if not value:
            return None
        return _parse_range(value, 'inter_packet_gap_samples')

    def clean_sinr_grid_db(self):
        grid = self._float_list('sinr_grid_db')
        if grid is not None and list(grid) != sorted(grid):
            raise forms.ValidationError('sinr_grid_db must be in ascending order')
        return grid

    def clean_threshold(self):
        value = self.cleaned_data.get('threshold')
        if not value:
            return None
        if value.strip().lower() == AUTO:
            return AUTO
        try:
            threshold = float(value)
        except ValueError:
            raise forms.ValidationError(f"threshold must be a number or 'auto', got {value!r}")
        if not 0 < threshold <= 1:
            raise forms.ValidationError('threshold must be in (0, 1]')
        return threshold

    def clean_false_alarm_target(self):
        value = self.cleaned_data.get('false_alarm_target')
        if value is not None and not 0 < value < 1:
            raise forms.ValidationError('false_alarm_target must be in (0, 1)')
        return value

    def clean_ue_rows(self):
        return self._int_list('ue_rows')

    def clean_ue_gain_db(self):
        return self._float_list('ue_gain_db')

    def clean_relative_power_grid_db(self):
        return self._float_list('relative_power_grid_db')

    def clean_sweep_values(self):
        return self._int_list('sweep_values')

    def clean_interferer_subcarriers(self):
        return self._int_list('interferer_subcarriers')

    def clean(self):
        cleaned = super().clean()
        interferer_keys = [name for name in cleaned if name.startswith('interferer_') and name != 'interferer_subcarriers']
        if not cleaned.get('interferer_subcarriers') and any(cleaned.get(name) is not None for name in interferer_keys):
            raise forms.ValidationError('interferer_* settings need interferer_subcarriers')
        if bool(cleaned.get('sweep_axis')) != bool(cleaned.get('sweep_values')):
            raise forms.ValidationError('sweep_axis and sweep_values go together')
        return cleaned

    def _interferer(self):
        cleaned = self.cleaned_data
        if not cleaned.get('interferer_subcarriers'):
            return None
        kwargs = {'occupied_subcarriers': cleaned['interferer_subcarriers']}
        for name in ('relative_power_db', 'fft_size', 'cp_length', 'qpsk_seed'):
            value = cleaned.get(f'interferer_{name}')
            if value is not None:
                kwargs[name] = value
        return OfdmInterfererConfig(**kwargs)

    def to_scenario(self):
        """ScenarioConfig from a valid form. Raises ValueError on cross-field problems."""
        kwargs = {
            name: value for name, value in self.cleaned_data.items()
            if not name.startswith('interferer_') and value not in (None, '')
        }
        interferer = self._interferer()
        if interferer is not None:
            kwargs['interferer'] = interferer
        return ScenarioConfig(**kwargs)
