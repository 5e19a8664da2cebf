import os

import django

os.environ.setdefault("DJANGO_SETTINGS_MODULE", "Quantum_Estalg.settings")
django.setup()
