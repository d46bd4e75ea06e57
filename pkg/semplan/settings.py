"""
Semplan Django Settings
Contrafactuais em modelos lineares de equações estruturais (SEM)
"""

from pathlib import Path
from decouple import config

# Build paths inside the project like this: BASE_DIR / 'subdir'.
BASE_DIR = Path(__file__).resolve().parent.parent

# Sem superfície web: a chave só existe porque o Django exige uma.
SECRET_KEY = config('SECRET_KEY', default='semplan-insecure-dev-key')

DEBUG = config('DEBUG', default=False, cast=bool)

ALLOWED_HOSTS = []

# Application definition
INSTALLED_APPS = [
    # Local apps
    'apps.core',
    'apps.evidence',
    'apps.counterfactual',
    'apps.planning',
    'apps.discrete',
    'apps.oracle',
]

# Nenhum banco de dados: todos os cálculos são em memória.
DATABASES = {}

# =============================================================================
# INTERNATIONALIZATION
# =============================================================================
LANGUAGE_CODE = 'pt-br'
TIME_ZONE = 'America/Sao_Paulo'
USE_I18N = False
USE_TZ = True

# =============================================================================
# LOGGING
# =============================================================================
LOG_LEVEL = config('SEMPLAN_LOG_LEVEL', default='WARNING')

LOGGING = {
    'version': 1,
    'disable_existing_loggers': False,
    'formatters': {
        'simple': {
            'format': '[{levelname}] {name}: {message}',
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
        'apps': {
            'handlers': ['console'],
            'level': LOG_LEVEL,
            'propagate': False,
        },
    },
}

# =============================================================================
# SEMPLAN CUSTOM SETTINGS
# =============================================================================
SEMPLAN_SETTINGS = {
    # Monte Carlo (evidência disjuntiva e oráculo de mundos gêmeos)
    'SEED': config('SEMPLAN_SEED', default=0, cast=int),
    'N_SAMPLES': config('SEMPLAN_SAMPLES', default=1_000_000, cast=int),
    'CHUNK_SIZE': config('SEMPLAN_CHUNK_SIZE', default=50_000, cast=int),
    'WORKERS': config('SEMPLAN_WORKERS', default=1, cast=int),
    'FAMILY': config('SEMPLAN_FAMILY', default='gaussian'),
    'MIN_ACCEPTANCE': config('SEMPLAN_MIN_ACCEPTANCE', default=1e-4, cast=float),
    'K_SIGMA': config('SEMPLAN_K_SIGMA', default=4.0, cast=float),

    # Tolerâncias numéricas
    'TOL_STABILITY': config('SEMPLAN_TOL_STABILITY', default=1e-9, cast=float),
    'RHO_WARNING': 0.99,
    'COND_WARNING': 1e12,
    'PSD_TOL': 1e-8,
    'SYM_TOL': 1e-10,
    'ZERO_MASS': 1e-15,
    'CONSISTENCY_TOL': 1e-8,
}

# =============================================================================
# DEFAULT PRIMARY KEY
# =============================================================================
DEFAULT_AUTO_FIELD = 'django.db.models.BigAutoField'
