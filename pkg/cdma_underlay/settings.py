"""
Django settings for the cdma_underlay project.

Tunables are read from the environment (optionally a .env file) so sweeps can
be reconfigured without code changes.

For the full list of Django settings and their values, see
https://docs.djangoproject.com/en/5.2/ref/settings/
"""

import os
from pathlib import Path
from dotenv import load_dotenv
import dj_database_url

# Load environment variables from .env file
load_dotenv()

# Build paths inside the project like this: BASE_DIR / 'subdir'.
BASE_DIR = Path(__file__).resolve().parent.parent


# SECURITY WARNING: only the admin result browser uses this key.
SECRET_KEY = os.getenv('SECRET_KEY', 'django-insecure-change-me-in-production')

DEBUG = os.getenv('DEBUG', 'False') == 'True'

ALLOWED_HOSTS = os.getenv('ALLOWED_HOSTS', 'localhost,127.0.0.1').split(',')


# Application definition

INSTALLED_APPS = [
    'django.contrib.admin',
    'django.contrib.auth',
    'django.contrib.contenttypes',
    'django.contrib.sessions',
    'django.contrib.messages',
    'django.contrib.staticfiles',

    # Local apps
    'phy.apps.PhyConfig',
    'experiments.apps.ExperimentsConfig',
]

MIDDLEWARE = [
    'django.middleware.security.SecurityMiddleware',
    'django.contrib.sessions.middleware.SessionMiddleware',
    'django.middleware.common.CommonMiddleware',
    'django.middleware.csrf.CsrfViewMiddleware',
    'django.contrib.auth.middleware.AuthenticationMiddleware',
    'django.contrib.messages.middleware.MessageMiddleware',
    'django.middleware.clickjacking.XFrameOptionsMiddleware',
]

ROOT_URLCONF = 'cdma_underlay.urls'

TEMPLATES = [
    {
        'BACKEND': 'django.template.backends.django.DjangoTemplates',
        'DIRS': [],
        'APP_DIRS': True,
        'OPTIONS': {
            'context_processors': [
                'django.template.context_processors.request',
                'django.contrib.auth.context_processors.auth',
                'django.contrib.messages.context_processors.messages',
            ],
        },
    },
]

WSGI_APPLICATION = 'cdma_underlay.wsgi.application'


# Database
# Sweeps and calibrations are stored here; sqlite by default, PostgreSQL when
# several machines share results.

DATABASES = {
    'default': dj_database_url.config(
        default=os.getenv('DATABASE_URL', f'sqlite:///{BASE_DIR / "db.sqlite3"}'),
        conn_max_age=600,
    )
}


# Internationalization

LANGUAGE_CODE = 'en-us'

TIME_ZONE = 'UTC'

USE_I18N = True

USE_TZ = True


# Static files (admin only)

STATIC_URL = 'static/'
STATIC_ROOT = BASE_DIR / 'staticfiles'


DEFAULT_AUTO_FIELD = 'django.db.models.BigAutoField'


# Logging
# Library modules log through logging.getLogger(__name__); everything goes to
# the console at UNDERLAY_LOG_LEVEL.
UNDERLAY_LOG_LEVEL = os.getenv('UNDERLAY_LOG_LEVEL', 'INFO').upper()

LOGGING = {
    'version': 1,
    'disable_existing_loggers': False,
    'formatters': {
        'simple': {
            'format': '{asctime} {levelname} {name}: {message}',
            'style': '{',
        },
    },
    'handlers': {
        'console': {
            'class': 'logging.StreamHandler',
            'formatter': 'simple',
        },
    },
    'loggers': {
        'phy': {
            'handlers': ['console'],
            'level': UNDERLAY_LOG_LEVEL,
            'propagate': False,
        },
        'experiments': {
            'handlers': ['console'],
            'level': UNDERLAY_LOG_LEVEL,
            'propagate': False,
        },
    },
}


# Simulation defaults
UNDERLAY_SAMPLE_RATE_HZ = float(os.getenv('UNDERLAY_SAMPLE_RATE_HZ', 1e6))
UNDERLAY_SPREADING_ORDER = int(os.getenv('UNDERLAY_SPREADING_ORDER', 64))
UNDERLAY_WINDOW_SAMPLES = int(os.getenv('UNDERLAY_WINDOW_SAMPLES', 10000))

# Threshold calibration (threshold=auto): false alarms per scanned window
UNDERLAY_FA_TARGET = float(os.getenv('UNDERLAY_FA_TARGET', 1e-4))
UNDERLAY_CALIBRATION_WINDOWS = int(os.getenv('UNDERLAY_CALIBRATION_WINDOWS', 100000))
UNDERLAY_CALIBRATION_SEED = int(os.getenv('UNDERLAY_CALIBRATION_SEED', 1))

# Worker threads for sweeps; results do not depend on this value
UNDERLAY_THREADS = int(os.getenv('UNDERLAY_THREADS', 1))

# Full-size acceptance runs take minutes; off unless asked for
UNDERLAY_RUN_ACCEPTANCE = os.getenv('UNDERLAY_RUN_ACCEPTANCE', 'False') == 'True'
