"""
WSGI entry point for the result browser (Django admin over stored sweeps).

Only used by `runserver` locally; the simulator itself runs through
management commands.
"""

import os

from django.core.wsgi import get_wsgi_application

os.environ.setdefault('DJANGO_SETTINGS_MODULE', 'cdma_underlay.settings')

application = get_wsgi_application()
