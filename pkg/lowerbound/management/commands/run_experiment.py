from pathlib import Path

from django.core.exceptions import ValidationError
from django.core.management.base import BaseCommand, CommandError

from lowerbound.exceptions import NumericalError, ProblemInputError, RejectionBudgetExceeded
from lowerbound.forms import parse_config_text
from lowerbound.models import ExperimentRun
from lowerbound.problems import MAX_SEED
from lowerbound.runner import run, write_artifacts

EXIT_ASSERTION_FAILED = 1
EXIT_CONFIG_ERROR = 2
EXIT_NUMERICAL_ERROR = 3


class Command(BaseCommand):
    help = 'Run an ERM lower-bound experiment described by a key = value config file'

    def add_arguments(self, parser):
        parser.add_argument('--config', type=str, required=True, help='Path to the run config')
        parser.add_argument('--seed', type=int, help='Master seed, overrides the config (0 .. 2^64-1)')
        parser.add_argument('--out', type=str, help='CSV output path, overrides the config')
        parser.add_argument('--threads', type=int, help='Worker threads; never changes the output')

    def _config_error(self, message, config=None):
        ExperimentRun.record('config_error', config, summary=message)
        raise CommandError(f'Configuration error: {message}', returncode=EXIT_CONFIG_ERROR)

    def handle(self, *args, **options):
        if options['threads'] is not None and options['threads'] < 1:
            self._config_error(f"--threads must be at least 1, got {options['threads']}")
        if options['seed'] is not None and not 0 <= options['seed'] <= MAX_SEED:
            self._config_error(f"--seed must be an unsigned 64-bit integer, got {options['seed']}")

        try:
            text = Path(options['config']).read_text(encoding='utf-8')
            config = parse_config_text(text, seed=options['seed'], output=options['out'])
        except OSError as exc:
            self._config_error(f"cannot read {options['config']}: {exc}")
        except ValidationError as exc:
            self._config_error('; '.join(exc.messages))
        except ProblemInputError as exc:
            self._config_error(str(exc))

        try:
            outcome = run(config, workers=options['threads'])
        except ProblemInputError as exc:
            self._config_error(str(exc), config)
        except (NumericalError, RejectionBudgetExceeded) as exc:
            ExperimentRun.record('numerical_error', config, summary=str(exc))
            raise CommandError(f'Numerical error: {exc}', returncode=EXIT_NUMERICAL_ERROR)

        csv_path, summary = write_artifacts(config, outcome)
        ExperimentRun.record(outcome.status, config, csv_path=csv_path, summary=summary)

        if not outcome.passed:
            failed = [name for name, passed in outcome.checks.items() if not passed]
            for name in failed:
                self.stderr.write(self.style.WARNING(f'FAIL {name}'))
            raise CommandError(
                f'{len(failed)} in-run assertion(s) failed; results written to {csv_path}',
                returncode=EXIT_ASSERTION_FAILED,
            )
        self.stdout.write(
            self.style.SUCCESS(
                f'{config.experiment}: {len(outcome.rows)} row(s) written to {csv_path} (config {outcome.config_hash})'
            )
        )
