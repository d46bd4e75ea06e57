from django.apps import AppConfig


class CounterfactualConfig(AppConfig):
    default_auto_field = 'django.db.models.BigAutoField'
    name = 'apps.counterfactual'
    verbose_name = 'Contrafactuais'
