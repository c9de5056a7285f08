from django.apps import AppConfig


class ResamplingConfig(AppConfig):
    default_auto_field = "django.db.models.BigAutoField"
    name = "resampling"
