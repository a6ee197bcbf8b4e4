import logging

from django.conf import settings
from django.db import DatabaseError, models

logger = logging.getLogger(__name__)


class ExperimentRun(models.Model):
    """Provenance row written once per run_experiment invocation."""
    STATUS_CHOICES = [
        ('success', 'Success'),
        ('assertion_failed', 'Assertion Failed'),
        ('config_error', 'Configuration Error'),
        ('numerical_error', 'Numerical Error'),
    ]

    experiment = models.CharField(max_length=30, blank=True)
    problem_id = models.CharField(max_length=200, blank=True)
    seed = models.CharField(max_length=20, blank=True)  # u64 does not fit a signed bigint
    config_hash = models.CharField(max_length=12, blank=True)
    status = models.CharField(max_length=20, choices=STATUS_CHOICES)
    csv_path = models.CharField(max_length=500, blank=True)
    summary = models.TextField(blank=True)
    created_at = models.DateTimeField(auto_now_add=True)

    class Meta:
        ordering = ['-created_at']

    def __str__(self):
        return f"{self.experiment or 'run'} on {self.problem_id or '?'} - {self.status}"

    @classmethod
    def record(cls, status, config=None, csv_path='', summary=''):
        """Store a run; a database failure is logged and never raised."""
        if not getattr(settings, 'ERM_LAB_RECORD_RUNS', True):
            return None
        fields = {'status': status, 'csv_path': str(csv_path), 'summary': summary}
        if config is not None:
            fields.update(
                experiment=config.experiment,
                problem_id=config.problem.label,
                seed=str(config.seed),
                config_hash=config.config_hash,
            )
        try:
            return cls.objects.create(**fields)
        except DatabaseError as exc:
            logger.warning(f'could not record the run in the database: {exc}')
            return None
