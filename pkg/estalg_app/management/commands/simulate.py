"""
Django Management Command: Filter Simulation

Generates a homodyne measurement record (or replays a saved one) and runs the
Belavkin-Zakai filter on it, in the Ito or Stratonovich form and in the
density or pure-state picture.

Usage:
    python manage.py simulate --preset qubit-decay --dt 1e-3 --horizon 1 --seed 7 --out results/
    python manage.py simulate --preset qubit-decay --form both --out results/
    python manage.py simulate --preset qubit-decay --record results/record.csv --out replay/
    python manage.py simulate --preset qubit-decay --ensemble 500 --dt 5e-3 --out ensemble/

Output files (in --out):
    record.csv + record.json (generated records only), filter.csv or ensemble.csv
    (.json instead of .csv with --format json)

Exit codes:
    0 success, 1 input error, 3 filter degeneracy or numerical blow-up
"""

from django.core.exceptions import ValidationError
from django.core.management.base import CommandError

from estalg_app.conf import estalg_setting
from estalg_app.exceptions import FilterDegeneracyError, NumericalBlowupError
from estalg_app.forms import SimulateRunForm
from estalg_app.management.base import EXIT_DEGENERACY, EstalgCommand
from estalg_app.qfilter_sim import compare_forms, generate_record, run_ensemble, run_filter
from estalg_app.utils import (
    load_quantum_input, load_record, model_hash, save_record, write_json, write_table,
)


class Command(EstalgCommand):
    help = 'Simulate a homodyne record and integrate the Belavkin-Zakai filter along it'
    form_class = SimulateRunForm

    def add_arguments(self, parser):
        self.add_model_arguments(parser)
        parser.add_argument('--record', type=str, help='Replay a saved record.csv instead of generating one')
        parser.add_argument(
            '--dt', type=float, default=estalg_setting('DEFAULT_DT'),
            help='Time step (default: %(default)s)',
        )
        parser.add_argument(
            '--horizon', type=float, default=estalg_setting('DEFAULT_HORIZON'),
            help='Final time T (default: %(default)s)',
        )
        parser.add_argument(
            '--seed', type=int, default=estalg_setting('DEFAULT_SEED'),
            help='Seed of every random stream (default: %(default)s)',
        )
        parser.add_argument('--ensemble', type=int, default=1, help='Number of trajectories (default: 1)')
        parser.add_argument('--picture', type=str, choices=['density', 'pure'], default='density')
        parser.add_argument('--form', type=str, choices=['ito', 'strat', 'both'], default='ito')
        parser.add_argument(
            '--no-positivity-repair', dest='repair_positivity', action='store_false',
            help='Keep raw Euler/Heun states instead of clipping negative eigenvalues after every step',
        )
        parser.add_argument(
            '--threads', type=int,
            help='Worker threads for ensembles (default: ESTALG_THREADS or 1)',
        )
        self.add_output_arguments(parser)

    def handle(self, *args, **options):
        config = self.validated_config(options)
        try:
            problem = load_quantum_input(config.model, config.scheme, config.preset)
            digest = model_hash(problem.model_data)
            record = load_record(config.record, expected_hash=digest) if config.record else None
        except (ValidationError, ValueError) as e:
            raise self.input_error(e)

        out = self.output_dir(config)
        model, scheme = problem.model, problem.scheme
        try:
            if config.ensemble > 1:
                frame = run_ensemble(
                    model, scheme, problem.rho0, config.horizon, config.dt, config.ensemble,
                    seed=config.seed, observables=problem.observables, picture=config.picture,
                    form=config.form, threads=config.threads, repair=config.repair_positivity,
                )
                path = self._write(out, 'ensemble', frame, config.output_format)
            else:
                if record is None:
                    record = generate_record(
                        model, scheme, problem.rho0, config.horizon, config.dt,
                        seed=config.seed, repair=config.repair_positivity,
                    )
                    save_record(out, record, digest)
                    self.stdout.write(self.style.SUCCESS(
                        f'✅ Generated a record of {record.steps} steps on {record.n_channels} channel(s)'
                    ))
                if config.form == 'both':
                    frame = compare_forms(
                        record, model, scheme, problem.rho0, config.picture,
                        problem.observables, config.repair_positivity,
                    )
                else:
                    frame = run_filter(
                        record, model, scheme, problem.rho0, config.picture, config.form,
                        problem.observables, config.repair_positivity,
                    )
                path = self._write(out, 'filter', frame, config.output_format)
        except (FilterDegeneracyError, NumericalBlowupError) as e:
            self.stdout.write(self.style.ERROR(f'❌ {e} (step {e.step})'))
            raise CommandError(f'{e} (step {e.step})', returncode=EXIT_DEGENERACY)
        except ValueError as e:
            raise self.input_error(e)

        self.stdout.write(self.style.SUCCESS(f'✅ Wrote {len(frame)} rows to {path}'))

    def _write(self, out, stem, frame, output_format):
        if output_format == 'json':
            return write_json(out / f'{stem}.json', frame.to_dict(orient='list'))
        return write_table(out / f'{stem}.csv', frame)
