"""
ASGI config for pseudolearn project.
"""

import os

from django.core.asgi import get_asgi_application

os.environ.setdefault('DJANGO_SETTINGS_MODULE', 'pseudolearn.settings')

application = get_asgi_application()

