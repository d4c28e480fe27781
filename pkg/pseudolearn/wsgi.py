"""
WSGI config for pseudolearn project.
"""

import os

from django.core.wsgi import get_wsgi_application

os.environ.setdefault('DJANGO_SETTINGS_MODULE', 'pseudolearn.settings')

application = get_wsgi_application()

