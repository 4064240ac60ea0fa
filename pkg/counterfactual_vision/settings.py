"""
Django settings for counterfactual_vision project.

Generated by 'django-admin startproject' using Django 5.2.1.

The project has no HTTP surface: the engine lives in ``explainer_app`` and is
driven through management commands (``python manage.py explain ...``).

For the full list of settings and their values, see
https://docs.djangoproject.com/en/5.2/ref/settings/
"""

from pathlib import Path
import os
from dotenv import load_dotenv


# Build paths inside the project like this: BASE_DIR / 'subdir'.
BASE_DIR = Path(__file__).resolve().parent.parent

# Load environment variables from .env file (for local development)
env_file = BASE_DIR / ".env"
if env_file.exists():
    load_dotenv(env_file)


# Nothing is served, the key only satisfies Django's startup checks.
SECRET_KEY = os.environ.get("SECRET_KEY", "counterfactual-vision-local")

DEBUG = os.environ.get("DEBUG", "false").lower() == "true"

ALLOWED_HOSTS = []

# Application definition

INSTALLED_APPS = [
    "rest_framework",      # serializers validate every structured-text document
    "explainer_app",       # counterfactual explanation engine
]

# No tables: the engine keeps its artifacts on disk.
DATABASES = {}


# ── Engine configuration ─────────────────────────────────────────────────

def _env_int(name, default):
    raw = os.environ.get(name, "")
    return int(raw) if raw.strip() else default


EXPLAINER = {
    "SEED":       _env_int("EXPLAINER_SEED", 0),
    "WORKERS":    _env_int("EXPLAINER_WORKERS", 1),
    "OUTPUT_DIR": Path(os.environ.get("EXPLAINER_OUTPUT_DIR", BASE_DIR / "output")),
    # directory holding the four MNIST IDX files; MNIST reproduction tests skip without it
    "MNIST_DIR":  os.environ.get("EXPLAINER_MNIST_DIR") or None,
    "LOG_LEVEL":  os.environ.get("EXPLAINER_LOG_LEVEL", "INFO").upper(),
}


# ── Logging ──────────────────────────────────────────────────────────────

LOGGING = {
    "version": 1,
    "disable_existing_loggers": False,
    "formatters": {
        "plain": {
            "format": "%(asctime)s %(levelname)s %(name)s %(message)s",
        },
    },
    "handlers": {
        "console": {
            "class": "logging.StreamHandler",
            "formatter": "plain",
        },
    },
    "loggers": {
        "explainer_app": {
            "handlers": ["console"],
            "level": EXPLAINER["LOG_LEVEL"],
            "propagate": False,
        },
    },
}


# Internationalization
# https://docs.djangoproject.com/en/5.2/topics/i18n/

LANGUAGE_CODE = 'en-us'

TIME_ZONE = 'UTC'

USE_I18N = True

USE_TZ = True


# Default primary key field type
# https://docs.djangoproject.com/en/5.2/ref/settings/#default-auto-field

DEFAULT_AUTO_FIELD = 'django.db.models.BigAutoField'
