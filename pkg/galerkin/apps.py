from django.apps import AppConfig


class GalerkinConfig(AppConfig):
    name = 'galerkin'
    verbose_name = 'Heston weighted spectral-Galerkin lab'
