from django.conf import settings
from django.core.exceptions import ImproperlyConfigured


DEFAULTS = {
    'DEFAULT_TOL': 1e-9,
    'DEFAULT_DT': 1e-3,
    'DEFAULT_HORIZON': 1.0,
    'DEFAULT_SEED': 0,
    'MAX_DIM': 64,
    'DEGREE_GUARD': 60,
    'POSITIVITY_TOL': 1e-10,
    'DEGENERACY_FLOOR': 1e-300,
    'CONDITION_LIMIT': 1e12,
    'THREADS': 1,
}


def estalg_setting(name):
    """Read a value from settings.ESTALG, falling back to the built-in default"""
    try:
        configured = getattr(settings, 'ESTALG', None) or {}
    except ImproperlyConfigured:
        configured = {}
    return configured.get(name, DEFAULTS[name])
