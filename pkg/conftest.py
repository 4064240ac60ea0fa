"""Configure Django before pytest collects the explainer_app test modules."""
import os

import django

os.environ.setdefault("DJANGO_SETTINGS_MODULE", "counterfactual_vision.settings")
django.setup()
