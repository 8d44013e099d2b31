from django.db import transaction

from .configfile import serialize_scenario
from .models import RunPoint, SweepRun


@transaction.atomic
def save_sweep(cfg, result, name=''):
    """Store a finished sweep and its points; returns the SweepRun."""
    run = SweepRun.objects.create(
        name=name,
        kind=result.kind,
        config_text=serialize_scenario(cfg),
        master_seed=str(cfg.master_seed),
        threshold=result.threshold,
        axis=result.axis,
        threads=cfg.threads,
    )
    RunPoint.objects.bulk_create([
        RunPoint(
            run=run,
            position=position,
            sinr_db=point.sinr_db,
            relative_power_db=point.relative_power_db,
            ue_row=point.ue_row,
            axis_value=point.axis_value,
            trials=point.trials,
            detected=point.detected,
            decoded_correct=point.decoded_correct,
            decoded_wrong=point.decoded_wrong,
            undecoded_detected=point.undecoded_detected,
            missed=point.missed,
            false_alarms=point.false_alarms,
            windows_scanned=point.windows_scanned,
        )
        for position, point in enumerate(result.points)
    ])
    return run
