"""
Django Management Command: Identity Suite

Runs the zeta-calculus and Lindblad identities over seeded random models and
writes a pass/fail report with the largest defect of every identity.

Usage:
    python manage.py verify --out results/
    python manage.py verify --dims 2,3,4 --seeds 20 --out results/
    python manage.py verify --k-form paper-2.3 --out control/    (negative control, fails)

Output files (in --out):
    verify.json

Exit codes:
    0 all identities hold, 1 input error, 5 an identity failed
"""

from django.core.management.base import CommandError

from estalg_app.conf import estalg_setting
from estalg_app.forms import VerifyRunForm
from estalg_app.management.base import EXIT_VERIFY, EstalgCommand
from estalg_app.superops import KForm
from estalg_app.utils import write_json
from estalg_app.verification import run_identity_suite


class Command(EstalgCommand):
    help = 'Check the super-operator identities on seeded random models'
    form_class = VerifyRunForm

    def add_arguments(self, parser):
        parser.add_argument('--dims', type=str, default='2,3,4', help='Comma-separated dimensions (default: 2,3,4)')
        parser.add_argument('--seeds', type=int, default=10, help='Random models per dimension (default: 10)')
        parser.add_argument(
            '--seed', type=int, default=estalg_setting('DEFAULT_SEED'),
            help='Master seed (default: %(default)s)',
        )
        parser.add_argument(
            '--k-form', type=str, choices=KForm.choices(), default=KForm.DERIVED.value,
            help='Closed form of K(G, Theta) used by the split identity (default: derived)',
        )
        parser.add_argument(
            '--theorem', action='store_true',
            help='Also compare operator and estimation algebras on complete-homodyne models',
        )
        parser.add_argument('--out', type=str, default='.', help='Output directory (default: .)')

    def handle(self, *args, **options):
        config = self.validated_config(options)
        out = self.output_dir(config)

        report = run_identity_suite(
            dims=config.dims, seeds=config.seeds, seed=config.seed, k_form=config.k_form,
            theorem=config.theorem,
        )
        write_json(out / 'verify.json', report.to_dict())

        for name, result in report.results.items():
            line = f'{name}: max defect {result.max_defect:.3e} over {result.cases} cases'
            if result.passed:
                self.stdout.write(self.style.SUCCESS(f'✅ {line}'))
            else:
                self.stdout.write(self.style.ERROR(f'❌ {line}'))

        if not report.passed:
            raise CommandError(
                f'identities failed: {", ".join(report.failures)}', returncode=EXIT_VERIFY,
            )
        self.stdout.write(self.style.SUCCESS(
            f'✅ All identities hold on {len(config.dims) * config.seeds} random cases'
        ))
