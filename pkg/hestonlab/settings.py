"""
Django settings for the hestonlab project.

The project has no web surface: Django provides the settings layer, the
management-command front door (``manage.py heston ...``) and the test runner,
and Django REST framework provides config validation and report rendering.

For the full list of settings and their values, see
https://docs.djangoproject.com/en/6.0/ref/settings/
"""

from pathlib import Path
import os
import subprocess

# Build paths inside the project like this: BASE_DIR / 'subdir'.
BASE_DIR = Path(__file__).resolve().parent.parent


# SECURITY WARNING: keep the secret key used in production secret!
SECRET_KEY = os.environ.get(
    'DJANGO_SECRET_KEY',
    'django-insecure-hestonlab-batch-only-key-not-served-anywhere',
)

DEBUG = os.environ.get('DJANGO_DEBUG', '0') == '1'

ALLOWED_HOSTS = []

# Application definition

INSTALLED_APPS = [
    'django.contrib.contenttypes',
    'django.contrib.auth',
    'rest_framework',
    'galerkin',
]

MIDDLEWARE = []


# Database
# Nothing is persisted; sqlite keeps the test runner happy.

DATABASES = {
    'default': {
        'ENGINE': 'django.db.backends.sqlite3',
        'NAME': BASE_DIR / 'db.sqlite3',
    }
}

DEFAULT_AUTO_FIELD = 'django.db.models.BigAutoField'


# Internationalization

LANGUAGE_CODE = 'en-us'

TIME_ZONE = 'UTC'

USE_I18N = True

USE_TZ = True


# REST Framework Configuration
REST_FRAMEWORK = {
    'EXCEPTION_HANDLER': 'galerkin.exceptions.custom_exception_handler',
    'DEFAULT_RENDERER_CLASSES': [
        'rest_framework.renderers.JSONRenderer',
    ],
    'COERCE_DECIMAL_TO_STRING': False,
}


# Solver configuration
# Helper function to read numeric overrides
def _env_int(name: str, default: int) -> int:
    value = os.environ.get(name, '').strip()
    if not value:
        return default
    try:
        return int(value)
    except ValueError:
        return default


def _version() -> str:
    """HESTON_VERSION, else git describe of the checkout, else the package version."""
    value = os.environ.get('HESTON_VERSION', '').strip()
    if value:
        return value
    try:
        described = subprocess.run(
            ['git', 'describe', '--tags', '--always', '--dirty'],
            cwd=BASE_DIR, capture_output=True, text=True, timeout=5, check=True,
        ).stdout.strip()
    except (OSError, subprocess.SubprocessError):
        described = ''
    if described:
        return described
    from galerkin import __version__
    return __version__


HESTON_LOG_LEVEL = os.environ.get('HESTON_LOG_LEVEL', 'INFO').upper()

HESTON = {
    'VERSION': _version(),
    'OUTPUT_DIR': os.environ.get('HESTON_OUTPUT_DIR', str(BASE_DIR / 'artifacts')),
    # quadrature
    'POINTS_PER_PANEL': 24,
    'X_PANELS': 8,
    'X_TAIL_PANELS': 4,
    'XI_PANELS': 12,
    'XI_GRADING': 0.5,
    'TAIL_MASS': 1e-12,
    # tolerances
    'TOL_REL': 1e-8,
    'TOL_TRACE': 1e-8,
    'EPS_Q': 1e-6,
    'ENVELOPE_TOL': 1e-6,
    'GRAM_CONDITION_MAX': 1e14,
    # complex shifts
    'SHIFT_RADIUS': 0.5,
    # payoffs
    'GAMMA_CALL': 2.5,
    'GAMMA_PUT': 0.5,
    # Monte Carlo
    'MC_STEPS_PER_YEAR': 200,
    'MC_BLOCK_SIZE': 50_000,
    'MC_WORKERS': _env_int('HESTON_MC_WORKERS', 1),
}


# Logging
LOGGING = {
    'version': 1,
    'disable_existing_loggers': False,
    'formatters': {
        'verbose': {
            'format': '{asctime} {levelname} {name} {message}',
            'style': '{',
        },
    },
    'handlers': {
        'console': {
            'class': 'logging.StreamHandler',
            'formatter': 'verbose',
        },
    },
    'loggers': {
        'galerkin': {
            'handlers': ['console'],
            'level': HESTON_LOG_LEVEL,
            'propagate': False,
        },
    },
}
