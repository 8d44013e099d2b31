"""
SweepResult as CSV, one row per grid point in sweep order.

Single-link and plain coexistence sweeps use the base header; multi-UE results
lead with `ue_row`, a coexistence power grid with `relative_power_db` and a
parameter sweep with the swept field's name.
"""
import csv
import io

from .harness import KIND_PARAMETER

BASE_COLUMNS = [
    'sinr_db',
    'detection_rate',
    'det_ci_lo',
    'det_ci_hi',
    'per',
    'per_ci_lo',
    'per_ci_hi',
    'false_alarm_rate',
    'trials',
]


def _fmt(value):
    return f'{value:.6g}'


def result_columns(result):
    columns = []
    if result.kind == KIND_PARAMETER:
        columns.append(result.axis)
    if any(point.relative_power_db is not None for point in result.points):
        columns.append('relative_power_db')
    if any(point.ue_row is not None for point in result.points):
        columns.append('ue_row')
    return columns + BASE_COLUMNS


def point_row(point, result):
    det_lo, det_hi = point.detection_ci
    per_lo, per_hi = point.per_ci
    row = {
        'sinr_db': _fmt(point.sinr_db),
        'detection_rate': _fmt(point.detection_rate),
        'det_ci_lo': _fmt(det_lo),
        'det_ci_hi': _fmt(det_hi),
        'per': _fmt(point.packet_error_rate),
        'per_ci_lo': _fmt(per_lo),
        'per_ci_hi': _fmt(per_hi),
        'false_alarm_rate': _fmt(point.false_alarm_rate),
        'trials': point.trials,
    }
    if result.kind == KIND_PARAMETER:
        row[result.axis] = point.axis_value
    if point.relative_power_db is not None:
        row['relative_power_db'] = _fmt(point.relative_power_db)
    if point.ue_row is not None:
        row['ue_row'] = point.ue_row
    return row


def write_csv(result, stream):
    writer = csv.DictWriter(stream, fieldnames=result_columns(result), lineterminator='\n')
    writer.writeheader()
    for point in result.points:
        writer.writerow(point_row(point, result))


def result_to_csv(result):
    buffer = io.StringIO()
    write_csv(result, buffer)
    return buffer.getvalue()
