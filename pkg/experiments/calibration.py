"""
Threshold calibration backed by the ThresholdCalibration table. A key that
has been calibrated before is answered from the database.
"""
import logging

from phy.spreading import DEFAULT_ORDER, PREAMBLE_ROW, preamble_code

from .harness import calibrate_threshold
from .models import ThresholdCalibration

logger = logging.getLogger(__name__)


def get_or_calibrate_threshold(order=DEFAULT_ORDER, window_samples=10_000, false_alarm_target=1e-4,
                               n_noise_windows=100_000, seed=1, samples_per_chip=1):
    """Returns (threshold, created)."""
    key = dict(
        order=order,
        preamble_row=PREAMBLE_ROW,
        window_samples=window_samples,
        samples_per_chip=samples_per_chip,
        false_alarm_target=false_alarm_target,
        n_noise_windows=n_noise_windows,
        seed=str(seed),
    )
    cached = ThresholdCalibration.objects.filter(**key).first()
    if cached is not None:
        logger.debug('Using cached threshold %.4f', cached.threshold)
        return cached.threshold, False

    threshold = calibrate_threshold(
        preamble_code(order), window_samples, false_alarm_target, n_noise_windows, seed, samples_per_chip
    )
    ThresholdCalibration.objects.create(threshold=threshold, **key)
    return threshold, True


def cached_calibrator(preamble, window_samples, false_alarm_target, n_noise_windows, seed, samples_per_chip=1):
    """Drop-in for harness.calibrate_threshold that reads and fills the cache."""
    threshold, _ = get_or_calibrate_threshold(
        preamble.order, window_samples, false_alarm_target, n_noise_windows, seed, samples_per_chip
    )
    return threshold
