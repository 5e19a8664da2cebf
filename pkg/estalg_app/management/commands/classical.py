"""
Django Management Command: Classical Estimation Algebra

Analyses a polynomial filtering model dX = v dt + gamma0 dW, dY = h dt + dZ:
DMZ generator and its backward adjoint, the drift of the sensor, gauge field,
potential, exactness, Benes class and the exact Lie closure of Lie{L0*, h}.

Usage:
    python manage.py classical --preset kalman-1d --out results/
    python manage.py classical --model model.json --cap 40 --out results/

Output files (in --out):
    classical.json

Exit codes:
    0 finite algebra, 1 input error, 2 cap exceeded, 4 degree guard
"""

from django.core.exceptions import ValidationError
from django.core.management.base import CommandError

from estalg_app.classical_est import (
    backward_generator, benes_class, classical_closure, completed_square, dmz_generator,
    formal_adjoint, gauge_field, is_exact, potential_phi, sensor_drift,
)
from estalg_app.conf import estalg_setting
from estalg_app.exceptions import DegreeGuardError
from estalg_app.forms import ClassicalRunForm
from estalg_app.management.base import EXIT_CAP, EXIT_DEGREE_GUARD, EstalgCommand
from estalg_app.utils import load_classical_input, write_json


class Command(EstalgCommand):
    help = 'Analyse the classical (Brockett-Mitter) estimation algebra of a polynomial model'
    form_class = ClassicalRunForm

    def add_arguments(self, parser):
        self.add_model_arguments(parser, scheme=False)
        parser.add_argument('--cap', type=int, default=40, help='Dimension cap (default: 40)')
        parser.add_argument(
            '--degree-guard', type=int, default=estalg_setting('DEGREE_GUARD'),
            help='Abort when a bracket exceeds this total degree (default: %(default)s)',
        )
        parser.add_argument('--out', type=str, default='.', help='Output directory (default: .)')

    def handle(self, *args, **options):
        config = self.validated_config(options)
        try:
            model = load_classical_input(config.model, config.preset)
        except (ValidationError, ValueError) as e:
            raise self.input_error(e)

        out = self.output_dir(config)
        generator = dmz_generator(model)
        backward = backward_generator(model)
        verdict = benes_class(model)
        data = {
            'model': model.to_dict(),
            'dmz_generator': str(generator),
            'dmz_generator_terms': generator.to_dict(),
            'backward_generator': str(backward),
            'adjoint_matches': formal_adjoint(backward) == generator,
            'sensor_drift': [str(p) for p in sensor_drift(model)],
            'gauge_field': [[str(entry) for entry in row] for row in gauge_field(model)],
            'potential_phi': potential_phi(model).to_list(),
            'is_exact': is_exact(model),
            'benes_class': verdict.is_benes,
            'benes_reasons': list(verdict.reasons),
            'completed_square_matches': completed_square(model) == generator,
        }

        try:
            report = classical_closure(model, cap=config.cap, degree_guard=options['degree_guard'])
        except DegreeGuardError as e:
            data['closure'] = {'outcome': 'degree_guard', 'degree': e.degree}
            write_json(out / 'classical.json', data)
            self.stdout.write(self.style.ERROR(f'❌ {e}'))
            raise CommandError(str(e), returncode=EXIT_DEGREE_GUARD)

        data['closure'] = report.to_dict()
        write_json(out / 'classical.json', data)

        benes = '✅ Benes class' if verdict.is_benes else f'Not Benes: {"; ".join(verdict.reasons)}'
        self.stdout.write(f'{benes} (exact: {data["is_exact"]})')
        if not report.is_finite:
            message = f'symbolic closure exceeded cap {config.cap} (growth {list(report.growth_trace)})'
            self.stdout.write(self.style.WARNING(f'⚠️  {message}'))
            raise CommandError(message, returncode=EXIT_CAP)
        self.stdout.write(self.style.SUCCESS(
            f'✅ Estimation algebra: dimension {report.dimension} (growth {list(report.growth_trace)})'
        ))
