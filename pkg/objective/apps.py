from django.apps import AppConfig


class ObjectiveConfig(AppConfig):
    default_auto_field = "django.db.models.BigAutoField"
    name = "objective"
