# Generated by Django 4.2.7 on 2026-10-18 09:12

from django.db import migrations, models


class Migration(migrations.Migration):
    initial = True

    dependencies = []

    operations = [
        migrations.CreateModel(
            name="ExperimentRun",
            fields=[
                (
                    "id",
                    models.BigAutoField(
                        auto_created=True,
                        primary_key=True,
                        serialize=False,
                        verbose_name="ID",
                    ),
                ),
                ("run_id", models.CharField(max_length=50, unique=True)),
                ("algorithm", models.CharField(max_length=20)),
                (
                    "run_status",
                    models.CharField(
                        choices=[
                            ("PENDING", "Pending"),
                            ("RUNNING", "Running"),
                            ("COMPLETED", "Completed"),
                            ("FAILED", "Failed"),
                        ],
                        default="PENDING",
                        max_length=20,
                    ),
                ),
                ("sweep_id", models.CharField(blank=True, max_length=50)),
                ("trial", models.PositiveIntegerField(default=0)),
                ("config_hash", models.CharField(max_length=64)),
                ("config", models.JSONField(default=dict)),
                ("output_dir", models.CharField(max_length=500)),
                ("rounds", models.PositiveIntegerField(default=0)),
                ("started_at", models.DateTimeField(blank=True, null=True)),
                ("completed_at", models.DateTimeField(blank=True, null=True)),
                ("wall_clock_seconds", models.FloatField(blank=True, null=True)),
                ("final_accuracy", models.FloatField(blank=True, null=True)),
                ("global_scalars", models.BigIntegerField(default=0)),
                ("head_scalars", models.BigIntegerField(default=0)),
                ("control_messages", models.BigIntegerField(default=0)),
                ("validation_report", models.JSONField(default=dict)),
                ("error_logs", models.TextField(blank=True)),
                ("created_at", models.DateTimeField(auto_now_add=True)),
                ("updated_at", models.DateTimeField(auto_now=True)),
            ],
            options={
                "verbose_name": "Experiment Run",
                "verbose_name_plural": "Experiment Runs",
                "db_table": "experiment_runs",
                "ordering": ["-created_at"],
                "indexes": [
                    models.Index(
                        fields=["algorithm", "config_hash"],
                        name="experiment__algorit_5c1e2a_idx",
                    ),
                    models.Index(
                        fields=["sweep_id"], name="experiment__sweep_i_9b7d40_idx"
                    ),
                ],
            },
        ),
    ]
