from django.apps import AppConfig


class EnsembleConfig(AppConfig):
    default_auto_field = 'django.db.models.BigAutoField'
    name = 'apps.ensemble'
