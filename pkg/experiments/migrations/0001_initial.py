# Generated by Django 5.2.10 on 2026-10-19 09:12

import django.db.models.deletion
from django.db import migrations, models


class Migration(migrations.Migration):

    initial = True

    dependencies = [
    ]

    operations = [
        migrations.CreateModel(
            name='SweepRun',
            fields=[
                ('id', models.BigAutoField(auto_created=True, primary_key=True, serialize=False, verbose_name='ID')),
                ('name', models.CharField(blank=True, max_length=200)),
                ('kind', models.CharField(choices=[('single', 'Single link'), ('multi', 'Multi-UE'), ('coexistence', 'Coexistence'), ('parameter', 'Parameter sweep')], max_length=20)),
                ('config_text', models.TextField(help_text='Scenario file contents, as serialized')),
                ('master_seed', models.CharField(max_length=20)),
                ('threshold', models.FloatField()),
                ('axis', models.CharField(blank=True, max_length=50)),
                ('threads', models.PositiveIntegerField(default=1)),
                ('created_at', models.DateTimeField(auto_now_add=True)),
            ],
            options={
                'ordering': ['-created_at'],
            },
        ),
        migrations.CreateModel(
            name='ThresholdCalibration',
            fields=[
                ('id', models.BigAutoField(auto_created=True, primary_key=True, serialize=False, verbose_name='ID')),
                ('order', models.PositiveIntegerField()),
                ('preamble_row', models.PositiveIntegerField()),
                ('window_samples', models.PositiveIntegerField()),
                ('samples_per_chip', models.PositiveIntegerField(default=1)),
                ('false_alarm_target', models.FloatField()),
                ('n_noise_windows', models.PositiveIntegerField()),
                ('seed', models.CharField(max_length=20)),
                ('threshold', models.FloatField()),
                ('created_at', models.DateTimeField(auto_now_add=True)),
            ],
            options={
                'ordering': ['-created_at'],
                'constraints': [models.UniqueConstraint(fields=('order', 'preamble_row', 'window_samples', 'samples_per_chip', 'false_alarm_target', 'n_noise_windows', 'seed'), name='unique_calibration_key')],
            },
        ),
        migrations.CreateModel(
            name='RunPoint',
            fields=[
                ('id', models.BigAutoField(auto_created=True, primary_key=True, serialize=False, verbose_name='ID')),
                ('position', models.PositiveIntegerField()),
                ('sinr_db', models.FloatField()),
                ('relative_power_db', models.FloatField(blank=True, null=True)),
                ('ue_row', models.PositiveSmallIntegerField(blank=True, null=True)),
                ('axis_value', models.IntegerField(blank=True, null=True)),
                ('trials', models.PositiveIntegerField()),
                ('detected', models.PositiveIntegerField()),
                ('decoded_correct', models.PositiveIntegerField()),
                ('decoded_wrong', models.PositiveIntegerField()),
                ('undecoded_detected', models.PositiveIntegerField()),
                ('missed', models.PositiveIntegerField()),
                ('false_alarms', models.PositiveIntegerField()),
                ('windows_scanned', models.PositiveIntegerField()),
                ('run', models.ForeignKey(on_delete=django.db.models.deletion.CASCADE, related_name='points', to='experiments.sweeprun')),
            ],
            options={
                'ordering': ['run', 'position'],
                'unique_together': {('run', 'position')},
            },
        ),
    ]
