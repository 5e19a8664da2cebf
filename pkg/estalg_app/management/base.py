import logging
from pathlib import Path

from django.core.exceptions import ValidationError
from django.core.management.base import BaseCommand, CommandError

from ..conf import estalg_setting
from ..forms import form_errors

logger = logging.getLogger(__name__)

EXIT_INPUT = 1
EXIT_CAP = 2
EXIT_DEGENERACY = 3
EXIT_DEGREE_GUARD = 4
EXIT_VERIFY = 5


def error_message(exc):
    if isinstance(exc, ValidationError):
        return '; '.join(exc.messages)
    return str(exc)


class EstalgCommand(BaseCommand):
    """Shared plumbing: option validation through a form and exit-code errors"""
    form_class = None

    def add_model_arguments(self, parser, scheme=True):
        parser.add_argument('--model', type=str, help='Model JSON file')
        if scheme:
            parser.add_argument(
                '--scheme', type=str,
                help='Measurement scheme JSON file (default: complete homodyne, all phases 0)',
            )
        parser.add_argument('--preset', type=str, help='Embedded model name, e.g. qubit-decay')

    def add_output_arguments(self, parser):
        parser.add_argument('--out', type=str, default='.', help='Output directory (default: .)')
        parser.add_argument(
            '--format', type=str, choices=['csv', 'json'], default='csv',
            help='Table format for simulation outputs (default: csv)',
        )

    def add_closure_arguments(self, parser, default_cap=None):
        parser.add_argument(
            '--tol', type=float, default=estalg_setting('DEFAULT_TOL'),
            help='Independence tolerance, relative to the largest generator norm (default: %(default)s)',
        )
        parser.add_argument(
            '--cap', type=int, default=default_cap,
            help=(
                'Dimension cap (default: 2*d^2 for the operator algebra and 2*d^4 for the '
                'estimation algebra, the real dimensions of the ambient matrix spaces)'
            ),
        )

    def form_data(self, options):
        data = {key: value for key, value in options.items() if value is not None}
        if 'format' in data:
            data['output_format'] = data.pop('format')
        return data

    def validated_config(self, options):
        form = self.form_class(data=self.form_data(options))
        if not form.is_valid():
            message = form_errors(form)
            self.stdout.write(self.style.ERROR(f'❌ {message}'))
            raise CommandError(message, returncode=EXIT_INPUT)
        return form.to_config()

    def input_error(self, exc):
        message = error_message(exc)
        self.stdout.write(self.style.ERROR(f'❌ Input error: {message}'))
        return CommandError(message, returncode=EXIT_INPUT)

    def output_dir(self, config):
        out = Path(config.out)
        out.mkdir(parents=True, exist_ok=True)
        return out
