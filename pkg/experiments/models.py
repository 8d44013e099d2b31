from django.db import models

from .harness import wilson_interval


class SweepRun(models.Model):
    """One executed scenario, stored by `sweep --save`."""
    KIND_CHOICES = [
        ('single', 'Single link'),
        ('multi', 'Multi-UE'),
        ('coexistence', 'Coexistence'),
        ('parameter', 'Parameter sweep'),
    ]

    name = models.CharField(max_length=200, blank=True)
    kind = models.CharField(max_length=20, choices=KIND_CHOICES)
    config_text = models.TextField(help_text='Scenario file contents, as serialized')
    # Stored as text: seeds span the full unsigned 64-bit range
    master_seed = models.CharField(max_length=20)
    threshold = models.FloatField()
    axis = models.CharField(max_length=50, blank=True)
    threads = models.PositiveIntegerField(default=1)
    created_at = models.DateTimeField(auto_now_add=True)

    class Meta:
        ordering = ['-created_at']

    def __str__(self):
        return f"{self.name or self.get_kind_display()} (seed {self.master_seed})"


class RunPoint(models.Model):
    """Counts for one grid point of a stored run."""
    run = models.ForeignKey(SweepRun, on_delete=models.CASCADE, related_name='points')
    position = models.PositiveIntegerField()
    sinr_db = models.FloatField()
    relative_power_db = models.FloatField(null=True, blank=True)
    ue_row = models.PositiveSmallIntegerField(null=True, blank=True)
    axis_value = models.IntegerField(null=True, blank=True)

    trials = models.PositiveIntegerField()
    detected = models.PositiveIntegerField()
    decoded_correct = models.PositiveIntegerField()
    decoded_wrong = models.PositiveIntegerField()
    undecoded_detected = models.PositiveIntegerField()
    missed = models.PositiveIntegerField()
    false_alarms = models.PositiveIntegerField()
    windows_scanned = models.PositiveIntegerField()

    class Meta:
        ordering = ['run', 'position']
        unique_together = ['run', 'position']

    def __str__(self):
        return f"{self.run_id} @ {self.sinr_db:g} dB"

    @property
    def detection_rate(self):
        return self.detected / self.trials if self.trials else 0.0

    @property
    def packet_error_rate(self):
        return (self.trials - self.decoded_correct) / self.trials if self.trials else 0.0

    @property
    def false_alarm_rate(self):
        return self.false_alarms / self.windows_scanned if self.windows_scanned else 0.0

    @property
    def per_ci(self):
        return wilson_interval(self.trials - self.decoded_correct, self.trials)


class ThresholdCalibration(models.Model):
    """Cached calibrate_threshold result, so threshold=auto runs once per key."""
    order = models.PositiveIntegerField()
    preamble_row = models.PositiveIntegerField()
    window_samples = models.PositiveIntegerField()
    samples_per_chip = models.PositiveIntegerField(default=1)
    false_alarm_target = models.FloatField()
    n_noise_windows = models.PositiveIntegerField()
    seed = models.CharField(max_length=20)
    threshold = models.FloatField()
    created_at = models.DateTimeField(auto_now_add=True)

    class Meta:
        ordering = ['-created_at']
        constraints = [
            models.UniqueConstraint(
                fields=['order', 'preamble_row', 'window_samples', 'samples_per_chip',
                        'false_alarm_target', 'n_noise_windows', 'seed'],
                name='unique_calibration_key',
            ),
        ]

    def __str__(self):
        return f"{self.threshold:.4f} for FA {self.false_alarm_target:g}/window ({self.window_samples} samples)"
