from typing import Any

from django.conf import settings

DEFAULTS = {
    'SCHEMA_VERSION': 1,
    'T_STAR': 26.5,
    'GRID': [17.5, 20.0, 26.5, 35.0],
    'LAMBDA': 100.0,
    'FOLDS': 10,
    'SEED': 2018,
    'THREADS': 1,
    'OUT_DIR': 'out',
    'SCREEN_P': 0.1,
    'SMOOTHER_SPAN': 0.3,
    'MULTISTARTS': 8,
    'MAX_EVALUATIONS': 2000,
    'SLOW_TESTS': False,
}


def pseudolearn_setting(name: str) -> Any:
    """Project default from settings.PSEUDOLEARN, falling back to the built-in value."""
    overrides = getattr(settings, 'PSEUDOLEARN', {}) or {}
    if name in overrides:
        return overrides[name]
    return DEFAULTS[name]
