from django.contrib import admin

from .models import RunPoint, SweepRun, ThresholdCalibration

admin.site.site_header = "CDMA Underlay Results"
admin.site.site_title = "CDMA Underlay"
admin.site.index_title = "Experiment Results"


class RunPointInline(admin.TabularInline):
    model = RunPoint
    extra = 0
    readonly_fields = [
        'position', 'sinr_db', 'relative_power_db', 'ue_row', 'axis_value', 'trials',
        'detected', 'decoded_correct', 'decoded_wrong', 'undecoded_detected', 'missed',
        'false_alarms', 'windows_scanned', 'per_display',
    ]
    can_delete = False

    def per_display(self, obj):
        return f"{obj.packet_error_rate:.4f}"
    per_display.short_description = 'PER'


@admin.register(SweepRun)
class SweepRunAdmin(admin.ModelAdmin):
    list_display = ['__str__', 'kind', 'threshold', 'point_count', 'threads', 'created_at']
    list_filter = ['kind', 'created_at']
    search_fields = ['name', 'config_text']
    readonly_fields = ['created_at']
    inlines = [RunPointInline]

    def point_count(self, obj):
        return obj.points.count()
    point_count.short_description = 'Points'


@admin.register(ThresholdCalibration)
class ThresholdCalibrationAdmin(admin.ModelAdmin):
    list_display = ['threshold', 'false_alarm_target', 'window_samples', 'n_noise_windows', 'seed', 'order', 'created_at']
    list_filter = ['order', 'window_samples']
    readonly_fields = ['created_at']
