"""
Monte Carlo link-level experiments.

Every sweep is a grid of points; every point runs `trials_per_point`
independent trials. A trial builds random frames, places them in a stream,
passes the stream through the channel and the receiver, and scores the
detections against the truth. Trial randomness comes from
derive_seed(master_seed, *point index, trial index), so a trial's outcome does
not depend on which thread ran it or in what order. Counts are summed in trial
order.

Scoring, per transmitted packet (the four outcomes are exclusive):

    decoded_correct     an event within tolerance carries the packet's code
                        and the bit-exact frame
    decoded_wrong       an event within tolerance carries the packet's code
                        and a different frame
    undecoded_detected  detected, but neither of the above
    missed              no event within tolerance

Packet errors are everything except decoded_correct. Events not within
tolerance of any transmitted packet are false alarms, reported per scanned
window.
"""
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.stats import binomtest

from phy.channel import (
    DEFAULT_SELF_INTERFERENCE_CANCELLATION_DB,
    ChannelConfig,
    OfdmInterfererConfig,
    UePlacement,
    apply_channel,
    child_seed,
    derive_seed,
    superpose,
)
from phy.framing import MAX_PAYLOAD_BYTES, MacFrame
from phy.modem import DEFAULT_SAMPLE_RATE_HZ, TxConfig, build_packet_train, packet_length_samples
from phy.receiver import (
    DEFAULT_DETECTION_TOLERANCE,
    DEFAULT_WINDOW_SAMPLES,
    RESUME_AFTER_PACKET,
    RESUME_AFTER_PREAMBLE,
    correlate_preamble,
    default_detector,
    detect_and_decode,
)
from phy.spreading import DEFAULT_ORDER, RESERVED_ROWS, hadamard_row, preamble_code

logger = logging.getLogger(__name__)

AUTO = 'auto'
MAX_UES = DEFAULT_ORDER - len(RESERVED_ROWS)
MAX_SEED = 2 ** 64 - 1

KIND_SINGLE = 'single'
KIND_MULTI = 'multi'
KIND_COEXISTENCE = 'coexistence'
KIND_PARAMETER = 'parameter'

SWEEP_AXES = ('payload_bytes', 'inter_packet_gap_samples')

DEFAULT_FA_TARGET = 1e-4
DEFAULT_CALIBRATION_WINDOWS = 100_000


def _as_range(value, name, low, high=None):
    """An int or an inclusive (lo, hi) pair, normalized to a (lo, hi) tuple."""
    if isinstance(value, (tuple, list)):
        if len(value) != 2:
            raise ValueError(f'{name} range must be (lo, hi), got {value!r}')
        lo, hi = int(value[0]), int(value[1])
    else:
        lo = hi = int(value)
    if lo > hi or lo < low or (high is not None and hi > high):
        bound = f'[{low}, {high}]' if high is not None else f'>= {low}'
        raise ValueError(f'{name} must lie in {bound}, got {value!r}')
    return lo, hi


@dataclass(frozen=True)
class ScenarioConfig:
    """
    One experiment. `payload_bytes` and `inter_packet_gap_samples` take an int
    or an inclusive (lo, hi) range drawn uniformly per packet / per gap.
    """
    master_seed: int
    n_ues: int = 1
    payload_bytes: object = MAX_PAYLOAD_BYTES
    sinr_grid_db: tuple = (0.0, 1.0, 2.0, 3.0, 4.0, 5.0)
    trials_per_point: int = 10_000
    inter_packet_gap_samples: object = 0
    asynchronous: bool = True
    interferer: OfdmInterfererConfig = None
    threshold: object = AUTO
    ue_rows: tuple = ()
    ue_gain_db: tuple = ()
    packets_per_trial: int = 1
    window_samples: int = DEFAULT_WINDOW_SAMPLES
    detection_tolerance_samples: int = DEFAULT_DETECTION_TOLERANCE
    samples_per_chip: int = 1
    false_alarm_target: float = DEFAULT_FA_TARGET
    calibration_windows: int = DEFAULT_CALIBRATION_WINDOWS
    calibration_seed: int = 1
    self_interference_cancellation_db: float = DEFAULT_SELF_INTERFERENCE_CANCELLATION_DB
    relative_power_grid_db: tuple = ()
    sweep_axis: str = ''
    sweep_values: tuple = ()
    threads: int = 1

    def __post_init__(self):
        if not 0 <= int(self.master_seed) <= MAX_SEED:
            raise ValueError(f'master_seed must be a 64-bit unsigned integer, got {self.master_seed}')
        if not 1 <= self.n_ues <= MAX_UES:
            raise ValueError(f'n_ues must be in [1, {MAX_UES}], got {self.n_ues}')

        grid = tuple(float(v) for v in self.sinr_grid_db)
        if not grid:
            raise ValueError('sinr_grid_db must not be empty')
        if list(grid) != sorted(grid):
            raise ValueError(f'sinr_grid_db must be sorted ascending, got {list(grid)}')
        if not all(np.isfinite(grid)):
            raise ValueError('sinr_grid_db values must be finite')
        object.__setattr__(self, 'sinr_grid_db', grid)

        if self.trials_per_point < 1:
            raise ValueError(f'trials_per_point must be positive, got {self.trials_per_point}')
        if self.packets_per_trial < 1:
            raise ValueError(f'packets_per_trial must be positive, got {self.packets_per_trial}')
        object.__setattr__(self, 'payload_bytes', _as_range(self.payload_bytes, 'payload_bytes', 0, MAX_PAYLOAD_BYTES))
        object.__setattr__(
            self, 'inter_packet_gap_samples', _as_range(self.inter_packet_gap_samples, 'inter_packet_gap_samples', 0)
        )

        if self.threshold != AUTO:
            threshold = float(self.threshold)
            if not 0 < threshold <= 1:
                raise ValueError(f"threshold must be in (0, 1] or 'auto', got {self.threshold!r}")
            object.__setattr__(self, 'threshold', threshold)

        rows = tuple(int(r) for r in self.ue_rows) or tuple(range(2, 2 + self.n_ues))
        if len(rows) != self.n_ues:
            raise ValueError(f'ue_rows lists {len(rows)} rows for {self.n_ues} UEs')
        if len(set(rows)) != len(rows):
            raise ValueError(f'ue_rows must be distinct, got {list(rows)}')
        bad = [r for r in rows if r in RESERVED_ROWS or not 0 <= r < DEFAULT_ORDER]
        if bad:
            raise ValueError(f'ue_rows {bad} are reserved or outside [2, {DEFAULT_ORDER})')
        object.__setattr__(self, 'ue_rows', rows)

        gains = tuple(float(g) for g in self.ue_gain_db) or (0.0,) * self.n_ues
        if len(gains) != self.n_ues:
            raise ValueError(f'ue_gain_db lists {len(gains)} gains for {self.n_ues} UEs')
        object.__setattr__(self, 'ue_gain_db', gains)

        if self.window_samples < 1:
            raise ValueError('window_samples must be positive')
        if self.detection_tolerance_samples < 0:
            raise ValueError('detection_tolerance_samples must be nonnegative')
        if self.samples_per_chip < 1:
            raise ValueError('samples_per_chip must be positive')
        if not 0 < self.false_alarm_target < 1:
            raise ValueError(f'false_alarm_target must be in (0, 1), got {self.false_alarm_target}')
        if self.self_interference_cancellation_db < 0:
            raise ValueError('self_interference_cancellation_db must be nonnegative')
        if self.threads < 1:
            raise ValueError(f'threads must be positive, got {self.threads}')

        object.__setattr__(self, 'relative_power_grid_db', tuple(float(v) for v in self.relative_power_grid_db))
        if self.relative_power_grid_db and self.interferer is None:
            raise ValueError('relative_power_grid_db needs an interferer')

        if self.sweep_axis:
            if self.sweep_axis not in SWEEP_AXES:
                raise ValueError(f'sweep_axis must be one of {SWEEP_AXES}, got {self.sweep_axis!r}')
            if not self.sweep_values:
                raise ValueError(f'sweep_axis {self.sweep_axis} needs sweep_values')
            if self.sweep_axis == 'inter_packet_gap_samples' and self.packets_per_trial < 2:
                raise ValueError('An inter-packet gap sweep needs packets_per_trial >= 2')
            object.__setattr__(self, 'sweep_values', tuple(int(v) for v in self.sweep_values))
        elif self.sweep_values:
            raise ValueError('sweep_values given without sweep_axis')

    @property
    def kind(self):
        if self.sweep_axis:
            return KIND_PARAMETER
        if self.interferer is not None:
            return KIND_COEXISTENCE
        if self.n_ues > 1:
            return KIND_MULTI
        return KIND_SINGLE

    @property
    def max_packet_samples(self):
        return packet_length_samples(self.payload_bytes[1], DEFAULT_ORDER, self.samples_per_chip)


def wilson_interval(successes, trials):
    """95% Wilson score interval for a binomial proportion."""
    if trials <= 0:
        return 0.0, 1.0
    ci = binomtest(int(successes), int(trials)).proportion_ci(confidence_level=0.95, method='wilson')
    return float(ci.low), float(ci.high)


@dataclass
class SweepPoint:
    """Counts for one grid point (and one UE in multi-UE sweeps)."""
    sinr_db: float
    trials: int = 0
    detected: int = 0
    decoded_correct: int = 0
    decoded_wrong: int = 0
    undecoded_detected: int = 0
    missed: int = 0
    false_alarms: int = 0
    windows_scanned: int = 0
    ue_row: int = None
    relative_power_db: float = None
    axis_value: int = None

    def add(self, outcome):
        for name in ('trials', 'detected', 'decoded_correct', 'decoded_wrong', 'undecoded_detected',
                     'missed', 'false_alarms', 'windows_scanned'):
            setattr(self, name, getattr(self, name) + outcome[name])

    @property
    def packet_errors(self):
        return self.trials - self.decoded_correct

    @property
    def detection_rate(self):
        return self.detected / self.trials if self.trials else 0.0

    @property
    def packet_error_rate(self):
        return self.packet_errors / self.trials if self.trials else 0.0

    @property
    def false_alarm_rate(self):
        return self.false_alarms / self.windows_scanned if self.windows_scanned else 0.0

    @property
    def detection_ci(self):
        return wilson_interval(self.detected, self.trials)

    @property
    def per_ci(self):
        return wilson_interval(self.packet_errors, self.trials)

    def summary(self):
        prefix = ''
        if self.ue_row is not None:
            prefix += f'ue_row={self.ue_row} '
        if self.relative_power_db is not None:
            prefix += f'relative_power_db={self.relative_power_db:g} '
        if self.axis_value is not None:
            prefix += f'axis={self.axis_value} '
        return (
            f'{prefix}sinr_db={self.sinr_db:g} detection={self.detection_rate:.4f} '
            f'per={self.packet_error_rate:.4f} fa/window={self.false_alarm_rate:.2e} trials={self.trials}'
        )


@dataclass
class SweepResult:
    kind: str
    threshold: float
    points: list = field(default_factory=list)
    axis: str = ''

    def for_ue(self, row):
        return [point for point in self.points if point.ue_row == row]

    def at(self, sinr_db, **keys):
        """The point at `sinr_db` matching the given ue_row / relative_power_db / axis_value."""
        for point in self.points:
            if point.sinr_db == sinr_db and all(getattr(point, k) == v for k, v in keys.items()):
                return point
        raise KeyError(f'No point at sinr_db={sinr_db} {keys}')


# Calibration


def noise_window_maxima(preamble, window_samples, n_windows, seed, samples_per_chip=1):
    """
    Largest normalized preamble correlation in each of `n_windows` windows of
    standard-normal noise. Window i draws from derive_seed(seed, i).
    """
    preamble_samples = preamble.order * samples_per_chip
    maxima = np.empty(n_windows, dtype=np.float64)
    for index in range(n_windows):
        rng = np.random.default_rng(derive_seed(seed, index))
        noise = rng.standard_normal(window_samples + preamble_samples - 1)
        maxima[index] = correlate_preamble(noise, preamble, samples_per_chip).max()
    return maxima


def calibrate_threshold(preamble, window_samples, false_alarm_target, n_noise_windows, seed, samples_per_chip=1):
    """
    Detection threshold for a per-window false-alarm target: the empirical
    (1 - target) quantile of the per-window correlation maxima on noise.
    """
    if not 0 < false_alarm_target < 1:
        raise ValueError(f'false_alarm_target must be in (0, 1), got {false_alarm_target}')
    needed = int(np.ceil(10 / false_alarm_target))
    if n_noise_windows < needed:
        raise ValueError(
            f'{n_noise_windows} noise windows cannot resolve a {false_alarm_target:g} false-alarm target; '
            f'need at least {needed}'
        )
    maxima = noise_window_maxima(preamble, window_samples, n_noise_windows, seed, samples_per_chip)
    threshold = float(np.quantile(maxima, 1.0 - false_alarm_target))
    logger.info(
        'Calibrated threshold %.4f for %g false alarms/window (%d windows of %d samples, seed %d)',
        threshold, false_alarm_target, n_noise_windows, window_samples, seed,
    )
    return threshold


def resolve_threshold(cfg, calibrate=None):
    """cfg.threshold, or a calibrated one when it is 'auto'."""
    if cfg.threshold != AUTO:
        return cfg.threshold
    calibrate = calibrate or calibrate_threshold
    return calibrate(
        preamble_code(DEFAULT_ORDER),
        cfg.window_samples,
        cfg.false_alarm_target,
        cfg.calibration_windows,
        cfg.calibration_seed,
        cfg.samples_per_chip,
    )


# Trials


def _draw_frames(rng, cfg, count):
    lo, hi = cfg.payload_bytes
    frames = []
    for _ in range(count):
        length = int(rng.integers(lo, hi + 1))
        payload = rng.integers(0, 256, size=length, dtype=np.uint8).tobytes()
        frames.append(MacFrame(int(rng.integers(0, 256)), payload))
    return frames


def _draw_gaps(rng, cfg, count):
    lo, hi = cfg.inter_packet_gap_samples
    return [int(g) for g in rng.integers(lo, hi + 1, size=count)]


def _build_trial_stream(cfg, rng):
    """Transmitted stream plus the truth list [(ue_row, start, frame)]."""
    span = cfg.max_packet_samples
    if cfg.asynchronous:
        offsets = [int(o) for o in rng.integers(0, span, size=cfg.n_ues)]
    else:
        offsets = [int(rng.integers(0, span))] * cfg.n_ues

    placements, truths = [], []
    for ue_id, (row, gain_db, offset) in enumerate(zip(cfg.ue_rows, cfg.ue_gain_db, offsets)):
        tx = TxConfig(
            ue_code=hadamard_row(DEFAULT_ORDER, row),
            preamble_code=preamble_code(DEFAULT_ORDER),
            samples_per_chip=cfg.samples_per_chip,
        )
        frames = _draw_frames(rng, cfg, cfg.packets_per_trial)
        gaps = _draw_gaps(rng, cfg, cfg.packets_per_trial - 1)
        train = build_packet_train(frames, gaps or 0, tx, DEFAULT_SAMPLE_RATE_HZ)
        placements.append(UePlacement(ue_id=ue_id, signal=train, offset_samples=offset, gain_db=gain_db))

        start = offset
        for index, frame in enumerate(frames):
            truths.append((row, start, frame))
            start += packet_length_samples(frame.length, DEFAULT_ORDER, cfg.samples_per_chip)
            if index < len(gaps):
                start += gaps[index]

    tail = DEFAULT_ORDER * cfg.samples_per_chip
    total = max(p.offset_samples + len(p.signal) for p in placements) + tail
    return superpose(placements, total, DEFAULT_SAMPLE_RATE_HZ), truths


def _score(events, truths, tolerance, rows):
    """Per-UE outcome dicts for one trial."""
    outcomes = {
        row: dict(trials=0, detected=0, decoded_correct=0, decoded_wrong=0, undecoded_detected=0, missed=0)
        for row in rows
    }
    for row, start, frame in truths:
        counts = outcomes[row]
        counts['trials'] += 1
        near = [event for event in events if abs(event.start_index - start) <= tolerance]
        if not near:
            counts['missed'] += 1
            continue
        counts['detected'] += 1
        own = [event.decoded for event in near if event.is_decoded and event.matched_code_row == row]
        if frame in own:
            counts['decoded_correct'] += 1
        elif own:
            counts['decoded_wrong'] += 1
        else:
            counts['undecoded_detected'] += 1

    false_alarms = sum(
        1 for event in events
        if not any(abs(event.start_index - start) <= tolerance for _, start, _ in truths)
    )
    return outcomes, false_alarms


def run_trial(cfg, detector, sinr_db, point_key, trial, interferer=None):
    """
    One trial at one grid point. Returns {ue_row: counts} with the trial's
    false alarms and windows scanned copied into every UE's counts.
    """
    seed = derive_seed(cfg.master_seed, *point_key, trial)
    rng = np.random.default_rng(child_seed(seed, 0))
    stream, truths = _build_trial_stream(cfg, rng)

    channel = ChannelConfig(
        sinr_db=sinr_db,
        seed=child_seed(seed, 1),
        interferer=interferer,
        self_interference_cancellation_db=cfg.self_interference_cancellation_db,
    )
    # SINR is referenced to one unit-amplitude UE, whatever the UE count
    received = apply_channel(stream, channel, reference_power=1.0)

    stats = {}
    events = detect_and_decode(received, detector, stats)
    outcomes, false_alarms = _score(events, truths, cfg.detection_tolerance_samples, cfg.ue_rows)
    for counts in outcomes.values():
        counts['false_alarms'] = false_alarms
        counts['windows_scanned'] = stats['windows_scanned']
    return outcomes


def _detector(cfg, threshold):
    return default_detector(
        cfg.ue_rows,
        threshold,
        order=DEFAULT_ORDER,
        window_samples=cfg.window_samples,
        detection_tolerance_samples=cfg.detection_tolerance_samples,
        samples_per_chip=cfg.samples_per_chip,
        resume_policy=RESUME_AFTER_PREAMBLE if cfg.n_ues > 1 else RESUME_AFTER_PACKET,
    )


def _run_point(cfg, detector, sinr_db, point_key, interferer, executor, **labels):
    def trial(index):
        return run_trial(cfg, detector, sinr_db, point_key, index, interferer)

    trials = range(cfg.trials_per_point)
    outcomes = executor.map(trial, trials) if executor is not None else map(trial, trials)

    points = {row: SweepPoint(sinr_db=sinr_db, **labels) for row in cfg.ue_rows}
    for outcome in outcomes:
        for row, counts in outcome.items():
            points[row].add(counts)
    if cfg.n_ues > 1:
        for row, point in points.items():
            point.ue_row = row
    for point in points.values():
        logger.info('%s', point.summary())
    return [points[row] for row in cfg.ue_rows]


def _run_grid(cfg, threshold, grid, interferer_for=None):
    """
    Run every (prefix key, labels, sub-config) entry of `grid` across the SINR
    grid. Points come back in grid order, then SINR order, then UE row order.
    """
    detector = _detector(cfg, threshold)
    points = []
    executor = ThreadPoolExecutor(max_workers=cfg.threads) if cfg.threads > 1 else None
    try:
        for prefix, labels, sub_cfg in grid:
            interferer = interferer_for(labels) if interferer_for else sub_cfg.interferer
            for s_index, sinr_db in enumerate(sub_cfg.sinr_grid_db):
                points.extend(_run_point(
                    sub_cfg, detector, sinr_db, prefix + (s_index,), interferer, executor, **labels
                ))
    finally:
        if executor is not None:
            executor.shutdown()
    return points


def run_single_link_sweep(cfg, calibrate=None):
    if cfg.n_ues != 1:
        raise ValueError(f'A single-link sweep needs n_ues = 1, got {cfg.n_ues}')
    threshold = resolve_threshold(cfg, calibrate)
    points = _run_grid(cfg, threshold, [((), {}, cfg)])
    return SweepResult(KIND_SINGLE, threshold, points)


def run_multi_ue_sweep(cfg, calibrate=None):
    """Per-UE rates; the receiver listens for every UE's code at once."""
    if not 2 <= cfg.n_ues <= MAX_UES:
        raise ValueError(f'A multi-UE sweep needs 2 <= n_ues <= {MAX_UES}, got {cfg.n_ues}')
    threshold = resolve_threshold(cfg, calibrate)
    points = _run_grid(cfg, threshold, [((), {}, cfg)])
    return SweepResult(KIND_MULTI, threshold, points)


def run_coexistence_sweep(cfg, calibrate=None):
    """
    Packets under a residual OFDM interferer plus AWGN. With
    relative_power_grid_db set, the interferer power is swept as a second
    axis (outer loop).
    """
    if cfg.interferer is None:
        raise ValueError('A coexistence sweep needs an interferer')
    threshold = resolve_threshold(cfg, calibrate)
    if cfg.relative_power_grid_db:
        grid = [
            ((p_index,), {'relative_power_db': power}, cfg)
            for p_index, power in enumerate(cfg.relative_power_grid_db)
        ]

        def interferer_for(labels):
            return replace(cfg.interferer, relative_power_db=labels['relative_power_db'])
    else:
        grid = [((), {}, cfg)]
        interferer_for = None
    points = _run_grid(cfg, threshold, grid, interferer_for)
    return SweepResult(KIND_COEXISTENCE, threshold, points)


def run_parameter_sweep(cfg, calibrate=None):
    """The scenario repeated for every value of cfg.sweep_axis (outer loop)."""
    if not cfg.sweep_axis:
        raise ValueError('A parameter sweep needs sweep_axis and sweep_values')
    threshold = resolve_threshold(cfg, calibrate)
    grid = [
        ((a_index,), {'axis_value': value}, replace(cfg, sweep_axis='', sweep_values=(), **{cfg.sweep_axis: value}))
        for a_index, value in enumerate(cfg.sweep_values)
    ]
    points = _run_grid(cfg, threshold, grid)
    return SweepResult(KIND_PARAMETER, threshold, points, axis=cfg.sweep_axis)


def run_scenario(cfg, calibrate=None):
    """Dispatch on sweep axis, interferer and UE count."""
    runner = {
        KIND_PARAMETER: run_parameter_sweep,
        KIND_COEXISTENCE: run_coexistence_sweep,
        KIND_MULTI: run_multi_ue_sweep,
        KIND_SINGLE: run_single_link_sweep,
    }[cfg.kind]
    logger.info('Running %s sweep: %d grid points x %d trials', cfg.kind, len(cfg.sinr_grid_db), cfg.trials_per_point)
    return runner(cfg, calibrate)
