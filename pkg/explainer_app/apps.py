from django.apps import AppConfig


class ExplainerAppConfig(AppConfig):
    default_auto_field = 'django.db.models.BigAutoField'
    name = 'explainer_app'
    verbose_name = "Counterfactual explainer"
