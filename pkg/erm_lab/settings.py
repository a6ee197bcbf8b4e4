"""
Django settings for erm_lab project.

Only the ORM (run ledger) and management commands are used; there is no web
surface, so no URLconf, middleware or templates are configured.

For the full list of settings and their values, see
https://docs.djangoproject.com/en/6.0/ref/settings/
"""

from pathlib import Path
from decouple import config

# Build paths inside the project like this: BASE_DIR / 'subdir'.
BASE_DIR = Path(__file__).resolve().parent.parent


# SECURITY WARNING: keep the secret key used in production secret!
SECRET_KEY = config('DJANGO_SECRET_KEY', default='django-insecure-erm-lab-development-key')


# Application definition

INSTALLED_APPS = [
    'lowerbound',
]


# Database
# https://docs.djangoproject.com/en/6.0/ref/settings/#databases

DATABASES = {
    'default': {
        'ENGINE': 'django.db.backends.sqlite3',
        'NAME': config('ERM_LAB_DATABASE', default=str(BASE_DIR / 'db.sqlite3')),
    }
}


# Internationalization
# https://docs.djangoproject.com/en/6.0/topics/i18n/

LANGUAGE_CODE = 'en-us'

TIME_ZONE = 'UTC'

USE_I18N = True

USE_TZ = True


# Default primary key field type
DEFAULT_AUTO_FIELD = 'django.db.models.BigAutoField'


# Experiment settings
ERM_LAB_THREADS = config('ERM_LAB_THREADS', default=1, cast=int)  # default worker count without --threads
ERM_LAB_RECORD_RUNS = config('ERM_LAB_RECORD_RUNS', default=True, cast=bool)
ERM_LAB_LOG_LEVEL = config('ERM_LAB_LOG_LEVEL', default='INFO')

LOGGING = {
    'version': 1,
    'disable_existing_loggers': False,
    'formatters': {
        'plain': {
            'format': '{levelname} {name}: {message}',
            'style': '{',
        },
    },
    'handlers': {
        'console': {
            'class': 'logging.StreamHandler',
            'formatter': 'plain',
        },
    },
    'loggers': {
        'lowerbound': {
            'handlers': ['console'],
            'level': ERM_LAB_LOG_LEVEL,
            'propagate': False,
        },
    },
}
