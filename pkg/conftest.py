import os

import django

os.environ.setdefault('DJANGO_SETTINGS_MODULE', 'hestonlab.settings')
django.setup()
