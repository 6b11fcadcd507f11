from django.db import models


class ExperimentRun(models.Model):
    """
    Index entry for one executed trial. The run directory stays the source of
    truth; this row makes runs searchable by algorithm, hash and status.
    """
    RUN_STATUS = [
        ('PENDING', 'Pending'),
        ('RUNNING', 'Running'),
        ('COMPLETED', 'Completed'),
        ('FAILED', 'Failed'),
    ]

    # Run Information
    run_id = models.CharField(max_length=50, unique=True)
    algorithm = models.CharField(max_length=20)
    run_status = models.CharField(max_length=20, choices=RUN_STATUS, default='PENDING')
    sweep_id = models.CharField(max_length=50, blank=True)
    trial = models.PositiveIntegerField(default=0)

    # Configuration
    config_hash = models.CharField(max_length=64)
    config = models.JSONField(default=dict)
    output_dir = models.CharField(max_length=500)
    rounds = models.PositiveIntegerField(default=0)

    # Execution
    started_at = models.DateTimeField(null=True, blank=True)
    completed_at = models.DateTimeField(null=True, blank=True)
    wall_clock_seconds = models.FloatField(null=True, blank=True)

    # Results
    final_accuracy = models.FloatField(null=True, blank=True)
    global_scalars = models.BigIntegerField(default=0)
    head_scalars = models.BigIntegerField(default=0)
    control_messages = models.BigIntegerField(default=0)
    validation_report = models.JSONField(default=dict)
    error_logs = models.TextField(blank=True)

    created_at = models.DateTimeField(auto_now_add=True)
    updated_at = models.DateTimeField(auto_now=True)

    class Meta:
        db_table = 'experiment_runs'
        verbose_name = 'Experiment Run'
        verbose_name_plural = 'Experiment Runs'
        ordering = ['-created_at']
        indexes = [
            models.Index(fields=['algorithm', 'config_hash'], name='experiment__algorit_5c1e2a_idx'),
            models.Index(fields=['sweep_id'], name='experiment__sweep_i_9b7d40_idx'),
        ]

    def __str__(self):
        return f"Experiment Run - {self.algorithm} - {self.run_id}"

    @property
    def parameter_scalars(self):
        return self.global_scalars + self.head_scalars
