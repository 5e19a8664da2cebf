"""
Django Management Command: Lie Closures

Computes the operator algebra Lie{K(G, Theta), e^{i theta_k} L_k} (complete
homodyne detection only), the estimation algebra of super-operators, and
their comparison under the zeta map.

Usage:
    python manage.py closure --preset qubit-decay --out results/
    python manage.py closure --model model.json --scheme scheme.json --cap 8 --out results/

Output files (in --out):
    operator_algebra.json, estimation_algebra.json, theorem_main.json

Exit codes:
    0 success, 1 input error, 2 a closure exceeded its cap
"""

from django.core.exceptions import ValidationError
from django.core.management.base import CommandError

from estalg_app.forms import ClosureRunForm
from estalg_app.lie_engine import compare_algebras, estimation_algebra, operator_algebra
from estalg_app.management.base import EXIT_CAP, EstalgCommand
from estalg_app.utils import encode_matrix, load_quantum_input, model_hash, write_json


class Command(EstalgCommand):
    help = 'Compute the operator and estimation Lie algebras of a quantum filtering model'
    form_class = ClosureRunForm

    def add_arguments(self, parser):
        self.add_model_arguments(parser)
        self.add_closure_arguments(parser)
        self.add_output_arguments(parser)

    def handle(self, *args, **options):
        config = self.validated_config(options)
        try:
            problem = load_quantum_input(config.model, config.scheme, config.preset)
        except (ValidationError, ValueError) as e:
            raise self.input_error(e)

        model, scheme = problem.model, problem.scheme
        out = self.output_dir(config)
        digest = model_hash(problem.model_data)
        complete = scheme.is_complete(model.n_channels)
        capped = []

        ops = None
        if complete:
            ops = operator_algebra(model, scheme, tol=config.tol, cap=config.cap)
            data = ops.to_dict()
            data['model_hash'] = digest
            if ops.is_finite:
                data['basis'] = [encode_matrix(x) for x in ops.basis.elements]
            write_json(out / 'operator_algebra.json', data)
            self._summary('Operator algebra', ops)
            if not ops.is_finite:
                capped.append('operator algebra')
        else:
            self.stdout.write(self.style.WARNING(
                '⚠️  Incomplete observation: the operator algebra is defined for complete homodyne detection only'
            ))

        sup = estimation_algebra(model, scheme, tol=config.tol, cap=config.cap)
        data = sup.to_dict()
        data['model_hash'] = digest
        write_json(out / 'estimation_algebra.json', data)
        self._summary('Estimation algebra', sup)
        if not sup.is_finite:
            capped.append('estimation algebra')

        if ops is not None and not capped:
            check = compare_algebras(ops, sup, model.dim, tol=config.tol)
            write_json(out / 'theorem_main.json', check.to_dict())
            if check.passed:
                self.stdout.write(self.style.SUCCESS(
                    f'✅ zeta maps the operator algebra onto the estimation algebra '
                    f'(kernel dimension {check.kernel_dim})'
                ))
            else:
                self.stdout.write(self.style.ERROR(f'❌ Algebra comparison failed: {check.to_dict()}'))

        if capped:
            message = f'cap exceeded for the {" and ".join(capped)}'
            self.stdout.write(self.style.WARNING(f'⚠️  {message}'))
            raise CommandError(message, returncode=EXIT_CAP)

    def _summary(self, label, report):
        if report.is_finite:
            self.stdout.write(self.style.SUCCESS(
                f'✅ {label}: dimension {report.dimension} (growth {list(report.growth_trace)})'
            ))
        else:
            self.stdout.write(self.style.WARNING(
                f'⚠️  {label}: cap exceeded at dimension {report.dimension} '
                f'(growth {list(report.growth_trace)})'
            ))
