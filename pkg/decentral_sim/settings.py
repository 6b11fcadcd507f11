"""
Django settings for the decentralized learning simulator.
"""

from pathlib import Path

import environ

BASE_DIR = Path(__file__).resolve().parent.parent


# Environment variables
env = environ.Env(
    DEBUG=(bool, False),
    SECRET_KEY=(str, 'decentral-sim-local-only-key'),
    SIM_LOG_LEVEL=(str, 'INFO'),
    SIM_RECORD_RUNS=(bool, True),
    SIM_DEFAULT_PARALLEL=(int, 1),
)

# Read .env file
environ.Env.read_env(BASE_DIR / '.env')

SECRET_KEY = env('SECRET_KEY')

DEBUG = env('DEBUG')

ALLOWED_HOSTS = []

# Application definition
DJANGO_APPS = [
    'django.contrib.auth',
    'django.contrib.contenttypes',
]

THIRD_PARTY_APPS = [
    'rest_framework',
]

LOCAL_APPS = [
    'apps.topology',
    'apps.datagen',
    'apps.nn_core',
    'apps.attention',
    'apps.netsim',
    'apps.protocols',
    'apps.theory',
    'apps.experiments',
]

INSTALLED_APPS = DJANGO_APPS + THIRD_PARTY_APPS + LOCAL_APPS

# Database
# The run index lives in SQLite; run directories remain the source of truth.
DATABASES = {
    'default': env.db('DATABASE_URL', default=f"sqlite:///{BASE_DIR / 'db.sqlite3'}"),
}

DEFAULT_AUTO_FIELD = 'django.db.models.BigAutoField'

# Internationalization
LANGUAGE_CODE = 'en-us'
TIME_ZONE = 'UTC'
USE_I18N = False
USE_TZ = True

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
        'apps': {
            'handlers': ['console'],
            'level': env('SIM_LOG_LEVEL'),
            'propagate': False,
        },
    },
}

# Simulation Configuration
SIM_OUTPUT_DIR = Path(env('SIM_OUTPUT_DIR', default=str(BASE_DIR / 'runs')))
SIM_RECORD_RUNS = env('SIM_RECORD_RUNS')
SIM_DEFAULT_PARALLEL = env('SIM_DEFAULT_PARALLEL')

SIMULATION = {
    'RMSPROP_DECAY': 0.9,
    'RMSPROP_EPS': 1e-8,
    'BATCH_SIZE': 32,
    'BETA_INIT_RANGE': 0.1,
    'CONNECT_MAX_ATTEMPTS': 1000,
    'PARTITION_MAX_ATTEMPTS': 1000,
    'MIN_WRITER_SAMPLES': 4,
    'FINITE_DIFF_STEP': 1e-5,
    'FINITE_DIFF_COORDS': 64,
    'GAP_TOLERANCE': 1e-10,
    'STOCHASTIC_TOLERANCE': 1e-12,
    'CI_Z_VALUE': 1.96,
    'DSGD_FT_EPOCHS': 5,
    'GT_STEP_SCALE': 1.0,
}

# CE-GATTA threshold rules
TAU_RULES = [
    'quarter_deg',
    'inv_deg',
    'scaled_deg',
    'fixed',
]

# Algorithms
ALGORITHMS = [
    'gatta',
    'ce_gatta',
    'dsgd',
    'fl',
    'il',
    'repdl',
    'dsgd_ft',
    'gt_dsgd',
]

# Data regimes
DATA_REGIMES = [
    'label_skew',
    'feature_skew',
    'idx',
]

# Topology kinds
TOPOLOGY_KINDS = [
    'erdos_renyi',
    'ring',
    'complete',
    'edge_list',
]
