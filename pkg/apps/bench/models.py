from django.db import models

from .services import BenchReport


class BenchRun(models.Model):
    scenario = models.CharField(max_length=4)
    censoring_target = models.FloatField()
    replicates = models.PositiveIntegerField()
    completed = models.PositiveIntegerField(default=0)
    seed = models.BigIntegerField()
    methods = models.JSONField(default=list)
    report = models.JSONField()
    created_at = models.DateTimeField(auto_now_add=True)

    class Meta:
        ordering = ['-created_at']

    def __str__(self):
        return f"Scenario {self.scenario} ({self.censoring_target:.0%} censoring, {self.completed}/{self.replicates})"

    @classmethod
    def record(cls, report: BenchReport) -> 'BenchRun':
        scenario = report.config.get('scenario', {})
        return cls.objects.create(
            scenario=scenario.get('scenario', ''),
            censoring_target=scenario.get('censoring_target', 0.0),
            replicates=report.replicates,
            completed=report.completed,
            seed=scenario.get('seed', 0),
            methods=[summary.method for summary in report.methods],
            report=report.to_dict(),
        )

    def as_report(self) -> BenchReport:
        return BenchReport.from_dict(self.report)
