from django.apps import AppConfig


class EstalgAppConfig(AppConfig):
    default_auto_field = "django.db.models.BigAutoField"
    name = "estalg_app"
    verbose_name = "Quantum estimation algebras"
