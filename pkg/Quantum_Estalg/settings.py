"""
Django settings for Quantum_Estalg project.

The project has no web surface: it hosts the estalg_app library and its
management commands (closure, simulate, verify, classical).

For more information on this file, see
https://docs.djangoproject.com/en/5.2/topics/settings/

For the full list of settings and their values, see
https://docs.djangoproject.com/en/5.2/ref/settings/
"""

import os
from pathlib import Path

# Build paths inside the project like this: BASE_DIR / 'subdir'.
BASE_DIR = Path(__file__).resolve().parent.parent


# SECURITY WARNING: keep the secret key used in production secret!
SECRET_KEY = os.environ.get(
    "DJANGO_SECRET_KEY",
    "django-insecure-estalg-local-only-7v1x0q3m9k2p",
)

DEBUG = os.environ.get("DJANGO_DEBUG", "") == "1"

ALLOWED_HOSTS = []


# Application definition

INSTALLED_APPS = [
    "estalg_app",
]

MIDDLEWARE = []


# Database
# Nothing is persisted; every command writes its results to files.

DATABASES = {}


# Internationalization
# https://docs.djangoproject.com/en/5.2/topics/i18n/

LANGUAGE_CODE = "en-us"

TIME_ZONE = "UTC"

USE_I18N = False

USE_TZ = True


# Numerical defaults for the estimation-algebra library

ESTALG = {
    "DEFAULT_TOL": 1e-9,
    "DEFAULT_DT": 1e-3,
    "DEFAULT_HORIZON": 1.0,
    "DEFAULT_SEED": 0,
    "MAX_DIM": 64,
    "DEGREE_GUARD": 60,
    "POSITIVITY_TOL": 1e-10,
    "DEGENERACY_FLOOR": 1e-300,
    "CONDITION_LIMIT": 1e12,
    "THREADS": max(1, int(os.environ.get("ESTALG_THREADS", "1") or 1)),
}


# Logging
# https://docs.djangoproject.com/en/5.2/topics/logging/

LOGGING = {
    "version": 1,
    "disable_existing_loggers": False,
    "formatters": {
        "plain": {
            "format": "{asctime} {levelname} {name}: {message}",
            "style": "{",
        },
    },
    "handlers": {
        "console": {
            "class": "logging.StreamHandler",
            "formatter": "plain",
        },
    },
    "loggers": {
        "estalg_app": {
            "handlers": ["console"],
            "level": os.environ.get("ESTALG_LOG_LEVEL", "WARNING"),
            "propagate": False,
        },
    },
}


DEFAULT_AUTO_FIELD = "django.db.models.BigAutoField"
