from django.apps import AppConfig


class OracleConfig(AppConfig):
    default_auto_field = 'django.db.models.BigAutoField'
    name = 'apps.oracle'
    verbose_name = 'Oráculo de Mundos Gêmeos'
