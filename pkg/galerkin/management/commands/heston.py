"""
Batch front door: python manage.py heston <subcommand> <config.json>
"""
import logging

from django.core.management.base import BaseCommand, CommandError
from rest_framework.exceptions import ParseError, ValidationError
from rest_framework.parsers import JSONParser

from galerkin import services
from galerkin.exceptions import EXIT_MALFORMED, EXIT_VIOLATION, HestonError, exit_code_for
from galerkin.mixins import StandardReportMixin
from galerkin.serializers import validated_config

logger = logging.getLogger('galerkin')


class Command(StandardReportMixin, BaseCommand):
    help = 'Validate, verify and price the Heston problem with the weighted spectral-Galerkin solver'

    def add_arguments(self, parser):
        parser.add_argument('subcommand', choices=sorted(services.WORKFLOWS))
        parser.add_argument('config', help='Path to the JSON run configuration')
        parser.add_argument('--output-dir', dest='output_dir', default=None,
                            help='Directory for CSV/JSON artifacts (overrides outputDir)')

    def load_config(self, path: str) -> dict:
        try:
            with open(path, 'rb') as stream:
                data = JSONParser().parse(stream)
        except OSError as exc:
            raise HestonError(f"Cannot read config '{path}': {exc.strerror}", code='config_unreadable')
        except ParseError as exc:
            raise HestonError(f"Config '{path}' is not valid JSON: {exc.detail}", code='malformed_config')
        if not isinstance(data, dict):
            raise HestonError('Config must be a JSON object', code='malformed_config')
        return validated_config(data)

    def fail(self, payload: dict, exit_code: int):
        self.stdout.write(self.render(payload))
        raise CommandError(payload.get('message', 'Run failed'), returncode=exit_code)

    def handle(self, *args, **options):
        subcommand = options['subcommand']
        try:
            config = self.load_config(options['config'])
            result = services.run(subcommand, config, options['output_dir'])
        except (HestonError, ValidationError) as exc:
            logger.warning("heston %s failed: %s", subcommand, exc)
            self.fail(self.exception_payload(exc), exit_code_for(exc))
        except OSError as exc:
            # unwritable output directory
            logger.error("heston %s could not write artifacts: %s", subcommand, exc)
            self.fail(self.error_payload(f"Cannot write artifacts: {exc}", code='output_unwritable'), EXIT_MALFORMED)

        if result.succeeded:
            self.stdout.write(self.render(self.success_payload(result.data, result.message)))
            return
        self.fail(self.error_payload(result.message, errors=result.violations or None, data=result.data,
                                     code='violation' if result.exit_code == EXIT_VIOLATION else 'validation_failed'),
                  result.exit_code)
