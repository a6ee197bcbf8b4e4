from django.apps import AppConfig


class LowerboundConfig(AppConfig):
    name = 'lowerbound'
    verbose_name = 'ERM lower bound experiments'
