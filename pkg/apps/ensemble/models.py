from django.db import models

from .services import BINARY_NNLOGLIK, PSEUDO_AUC, EnsembleModel, ensemble_from_payload

MODE_CHOICES = [
    (PSEUDO_AUC, 'Pseudo-observation AUC'),
    (BINARY_NNLOGLIK, 'IPCW binary NNloglik'),
]


class FittedEnsemble(models.Model):
    name = models.CharField(max_length=100)
    mode = models.CharField(max_length=20, choices=MODE_CHOICES)
    t_star = models.FloatField()
    grid = models.JSONField(default=list)
    cause = models.PositiveSmallIntegerField(default=1)
    payload = models.JSONField()
    artifact_path = models.CharField(max_length=500)
    created_at = models.DateTimeField(auto_now_add=True)

    class Meta:
        ordering = ['-created_at']

    def __str__(self):
        return f"{self.name} ({self.mode}, t*={self.t_star:g})"

    @classmethod
    def record(cls, name: str, model: EnsembleModel, artifact_path) -> 'FittedEnsemble':
        return cls.objects.create(
            name=name,
            mode=model.mode,
            t_star=model.t_star,
            grid=list(model.grid),
            cause=model.cause,
            payload=model.to_dict(),
            artifact_path=str(artifact_path),
        )

    def as_ensemble(self) -> EnsembleModel:
        return ensemble_from_payload(self.payload, self.artifact_path)
