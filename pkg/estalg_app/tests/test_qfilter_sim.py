import numpy as np
import pandas as pd
from django.test import SimpleTestCase

from estalg_app.exceptions import (
    DimensionMismatchError, FilterDegeneracyError, IncompleteSchemeError, InvalidStateError,
    SchemeError,
)
from estalg_app.operators import SIGMA_X, SIGMA_Z
from estalg_app.qfilter_sim import (
    BelavkinZakaiFilter, FilterState, Form, Picture, TrajectoryRecord, check_density,
    coarsen_record, compare_forms, generate_record, lindblad_expectation, normalize, pure_vector,
    repair_positivity, run_ensemble, run_filter, zakai_step_ito,
)
from estalg_app.utils import load_quantum_input


def zero_record(steps, dt, channels=1):
    return TrajectoryRecord(
        t_grid=dt * np.arange(steps), dY=np.zeros((steps, channels)),
        dW=np.zeros((steps, channels)), dt=dt,
    )


class StateTests(SimpleTestCase):

    def test_check_density(self):
        check_density(np.diag([0.25, 0.75]))
        with self.assertRaises(InvalidStateError):
            check_density(np.diag([1.0, 1.0]))
        with self.assertRaises(InvalidStateError):
            check_density(np.diag([1.5, -0.5]))
        with self.assertRaises(InvalidStateError):
            check_density([[0.5, 0.5], [0.0, 0.5]])
        with self.assertRaises(DimensionMismatchError):
            check_density(np.eye(2) / 2, dim=3)

    def test_pure_vector(self):
        chi = pure_vector([[0.5, 0.5], [0.5, 0.5]])
        self.assertAlmostEqual(abs(np.vdot(chi, [1, 1])) ** 2 / 2, 1.0)
        np.testing.assert_allclose(pure_vector([3.0, 4.0]), [0.6, 0.8])
        with self.assertRaises(InvalidStateError):
            pure_vector(np.eye(2) / 2)

    def test_from_density_hermitizes(self):
        state = FilterState.from_density([[1.0, 1j], [0.0, 0.0]])
        np.testing.assert_allclose(state.data, state.data.conj().T)

    def test_normalize_degenerate_state(self):
        with self.assertRaises(FilterDegeneracyError):
            normalize(FilterState.from_density(np.zeros((2, 2)), step=4))

    def test_repair_positivity(self):
        rho, fixed = repair_positivity(np.diag([1.2, -0.2]))
        self.assertTrue(fixed)
        np.testing.assert_allclose(rho, np.diag([1.0, 0.0]), atol=1e-15)
        rho, fixed = repair_positivity(np.diag([0.3, 0.7]))
        self.assertFalse(fixed)

    def test_record_shapes_checked(self):
        with self.assertRaises(DimensionMismatchError):
            TrajectoryRecord(t_grid=np.arange(3), dY=np.zeros((4, 1)), dW=np.zeros((4, 1)), dt=1.0)
        with self.assertRaises(DimensionMismatchError):
            TrajectoryRecord(t_grid=np.arange(3), dY=np.zeros((3, 1)), dW=np.zeros((3, 2)), dt=1.0)
        record = TrajectoryRecord(t_grid=np.arange(3), dY=np.zeros(3), dW=np.zeros(3), dt=1.0)
        self.assertEqual(record.n_channels, 1)
        self.assertEqual(record.horizon, 3.0)


class RecordTests(SimpleTestCase):

    def setUp(self):
        self.problem = load_quantum_input(preset='qubit-decay')

    def generate(self, **kwargs):
        p = self.problem
        return generate_record(p.model, p.scheme, p.rho0, horizon=0.2, dt=0.01, **kwargs)

    def test_grid(self):
        record = self.generate(seed=3)
        self.assertEqual(record.steps, 20)
        self.assertEqual(record.dY.shape, (20, 1))
        self.assertAlmostEqual(record.t_grid[-1], 0.19)

    def test_same_seed_same_record(self):
        a, b = self.generate(seed=3), self.generate(seed=3)
        np.testing.assert_array_equal(a.dY, b.dY)
        np.testing.assert_array_equal(a.dW, b.dW)

    def test_streams_are_independent(self):
        a, b = self.generate(seed=3, stream=0), self.generate(seed=3, stream=1)
        self.assertFalse(np.array_equal(a.dW, b.dW))

    def test_first_increment_carries_the_signal(self):
        record = self.generate(seed=9)
        # tr(rho0 (L + L^dagger)) = <+|sigma_x|+> = 1
        self.assertAlmostEqual((record.dY[0, 0] - record.dW[0, 0]) / record.dt, 1.0)

    def test_horizon_shorter_than_step(self):
        p = self.problem
        with self.assertRaises(ValueError):
            generate_record(p.model, p.scheme, p.rho0, horizon=0.001, dt=0.01)

    def test_coarsen(self):
        record = self.generate(seed=3)
        coarse = coarsen_record(record, 4)
        self.assertEqual(coarse.steps, 5)
        self.assertAlmostEqual(coarse.dt, 0.04)
        np.testing.assert_allclose(coarse.dY[1], record.dY[4:8].sum(axis=0))
        np.testing.assert_allclose(coarse.t_grid, [0.0, 0.04, 0.08, 0.12, 0.16])


class FilterStepTests(SimpleTestCase):

    def setUp(self):
        self.problem = load_quantum_input(preset='qubit-driven')
        self.filt = BelavkinZakaiFilter(self.problem.model, self.problem.scheme)
        self.rng = np.random.default_rng(0)

    def test_scale_invariance(self):
        rho0 = np.array([[0.3, 0.1], [0.1, 0.7]])
        a = FilterState.from_density(rho0)
        b = FilterState.from_density(3 * rho0)
        for d_y in self.rng.normal(0, 0.1, size=(20, 1)):
            a = self.filt.step_strat(self.filt.step_ito(a, d_y, 0.01), d_y, 0.01)
            b = self.filt.step_strat(self.filt.step_ito(b, d_y, 0.01), d_y, 0.01)
        na, nb = normalize(a), normalize(b)
        self.assertAlmostEqual(nb.norm / na.norm, 3.0, places=10)
        self.assertAlmostEqual(na.pi(SIGMA_Z), nb.pi(SIGMA_Z), places=12)
        self.assertEqual(a.step, 40)

    def test_module_level_step(self):
        state = FilterState.from_density(self.problem.rho0)
        p = self.problem
        np.testing.assert_allclose(
            zakai_step_ito(state, p.model, p.scheme, [0.05], 0.01).data,
            self.filt.step_ito(state, [0.05], 0.01).data,
        )

    def test_increment_width_checked(self):
        state = FilterState.from_density(self.problem.rho0)
        with self.assertRaises(DimensionMismatchError):
            self.filt.step_ito(state, [0.1, 0.2], 0.01)

    def test_picture_checked(self):
        state = FilterState.from_vector([0.0, 1.0])
        with self.assertRaises(ValueError):
            self.filt.step_ito(state, [0.1], 0.01)

    def test_complete_detection_has_no_unobserved_drift(self):
        self.assertTrue(self.filt.complete)
        self.assertFalse(np.any(self.filt.unobserved_star))

    def test_incomplete_detection(self):
        problem = load_quantum_input(preset='two-channel-qubit')
        filt = BelavkinZakaiFilter(problem.model, problem.scheme)
        self.assertFalse(filt.complete)
        self.assertIsNone(filt.k_strat)
        self.assertTrue(np.any(filt.unobserved_star))
        with self.assertRaises(IncompleteSchemeError):
            filt.pure_step(FilterState.from_vector([1.0, 0.0]), [0.1], 0.01, Form.STRAT)


class RunFilterTests(SimpleTestCase):

    def setUp(self):
        self.problem = load_quantum_input(preset='qubit-decay')
        p = self.problem
        self.record = generate_record(p.model, p.scheme, p.rho0, horizon=0.5, dt=0.005, seed=12)

    def filtered(self, record=None, **kwargs):
        p = self.problem
        return run_filter(record or self.record, p.model, p.scheme, p.rho0, **kwargs)

    def test_table_layout(self):
        frame = self.filtered(observables={'sx': SIGMA_X})
        self.assertEqual(len(frame), self.record.steps + 1)
        self.assertEqual(
            list(frame.columns), ['t', 'sigma_I', 're_pi_sx', 'im_pi_sx', 'min_eig', 'repairs'],
        )
        self.assertEqual(frame['t'].iloc[0], 0.0)
        self.assertAlmostEqual(frame['t'].iloc[-1], 0.5)

    def test_identity_expectation_is_one(self):
        frame = self.filtered(observables={'I': np.eye(2)})
        self.assertTrue((frame['re_pi_I'] == 1.0).all())
        self.assertTrue((frame['im_pi_I'] == 0.0).all())

    def test_default_observables(self):
        frame = self.filtered(observables=None)
        self.assertIn('re_pi_P0', frame.columns)
        np.testing.assert_allclose(frame['re_pi_P0'] + frame['re_pi_P1'], 1.0, atol=1e-12)

    def test_silent_record_keeps_the_norm(self):
        frame = self.filtered(record=zero_record(50, 0.01))
        np.testing.assert_allclose(frame['sigma_I'], 1.0, atol=1e-12)

    def test_pure_picture_stays_positive(self):
        for form in (Form.ITO, Form.STRAT):
            frame = self.filtered(picture=Picture.PURE, form=form)
            self.assertGreaterEqual(frame['min_eig'].min(), -1e-12)

    def test_repair_is_the_default(self):
        repaired = self.filtered()
        self.assertTrue(repaired['repairs'].is_monotonic_increasing)
        self.assertGreaterEqual(repaired['min_eig'].min(), -1e-10)
        raw = self.filtered(repair=False)
        self.assertTrue((raw['repairs'] == 0).all())
        self.assertLessEqual(raw['min_eig'].min(), repaired['min_eig'].min())

    def test_channel_count_checked(self):
        with self.assertRaises(SchemeError):
            self.filtered(record=zero_record(5, 0.01, channels=2))

    def test_pure_strat_needs_complete_detection(self):
        problem = load_quantum_input(preset='two-channel-qubit')
        record = generate_record(problem.model, problem.scheme, problem.rho0, 0.05, 0.01, seed=1)
        with self.assertRaises(IncompleteSchemeError):
            run_filter(record, problem.model, problem.scheme, problem.rho0, 'pure', 'strat')


class FormComparisonTests(SimpleTestCase):
    """One qubit-decay record on [0, 1], filtered at dt = 1e-3, 5e-4 and 2.5e-4"""

    FACTORS = (4, 2, 1)

    @classmethod
    def setUpClass(cls):
        super().setUpClass()
        cls.problem = p = load_quantum_input(preset='qubit-decay')
        fine = generate_record(p.model, p.scheme, p.rho0, horizon=1.0, dt=2.5e-4, seed=5)
        cls.records = [coarsen_record(fine, factor) for factor in cls.FACTORS]
        cls.gaps = []
        for record in cls.records:
            frame = compare_forms(
                record, p.model, p.scheme, p.rho0, picture=Picture.PURE, observables={'sz': SIGMA_Z},
            )
            cls.gaps.append(frame['absdiff_pi_sz'].max())

    def filtered(self, record, **kwargs):
        p = self.problem
        return run_filter(record, p.model, p.scheme, p.rho0, observables={'sz': SIGMA_Z}, **kwargs)

    def test_grids(self):
        self.assertEqual([r.steps for r in self.records], [1000, 2000, 4000])
        np.testing.assert_allclose([r.dt for r in self.records], [1e-3, 5e-4, 2.5e-4])

    def test_ito_strat_gap_shrinks_at_first_order(self):
        # L^2 = 0: the vector Euler step misses no second-order Ito term
        gaps = self.gaps
        self.assertGreater(gaps[0], gaps[1])
        self.assertGreater(gaps[1], gaps[2])
        order = np.log2(gaps[0] / gaps[2]) / 2
        self.assertGreaterEqual(order, 0.8)

    def test_pictures_agree_within_the_gap_envelope(self):
        spreads = []
        for record, gap in zip(self.records, self.gaps):
            density = self.filtered(record, form=Form.STRAT)
            pure = self.filtered(record, picture=Picture.PURE, form=Form.STRAT)
            spread = (density['re_pi_sz'] - pure['re_pi_sz']).abs().max()
            self.assertLess(spread, 10 * gap)
            spreads.append(spread)
        self.assertGreater(spreads[0], spreads[1])
        self.assertGreater(spreads[1], spreads[2])

    def test_identity_expectation_is_exact_on_every_grid(self):
        for record in self.records:
            frame = run_filter(
                record, self.problem.model, self.problem.scheme, self.problem.rho0,
                form=Form.STRAT, observables={'I': np.eye(2)},
            )
            self.assertTrue((frame['re_pi_I'] == 1.0).all())

    def test_positivity_drift(self):
        record = self.records[-1]
        for form in (Form.ITO, Form.STRAT):
            frame = self.filtered(record, form=form)
            drift = max(0.0, -frame['min_eig'].min()) / record.horizon
            self.assertLessEqual(drift, 1e-8)
        # rank one by construction, nothing to repair
        frame = self.filtered(record, picture=Picture.PURE, repair=False)
        self.assertLessEqual(max(0.0, -frame['min_eig'].min()) / record.horizon, 1e-8)

    def test_gap_under_coarse_refinement(self):
        p = load_quantum_input(preset='qubit-driven')
        fine = generate_record(p.model, p.scheme, p.rho0, horizon=0.5, dt=1e-4, seed=5)
        gaps = []
        for factor in (1, 50):
            frame = compare_forms(
                coarsen_record(fine, factor), p.model, p.scheme, p.rho0,
                observables={'sz': SIGMA_Z},
            )
            self.assertIn('absdiff_pi_sz', frame.columns)
            gaps.append(frame['absdiff_pi_sz'].max())
        self.assertLess(gaps[0], gaps[1])


class EnsembleTests(SimpleTestCase):

    def setUp(self):
        self.problem = load_quantum_input(preset='qubit-decay')

    def test_lindblad_expectation(self):
        p = self.problem
        values = lindblad_expectation(p.model, p.rho0, SIGMA_X, [0.0, 1.0])
        self.assertAlmostEqual(values[0].real, 1.0)
        self.assertAlmostEqual(values[1].real, np.exp(-0.5), places=10)

    def test_thread_count_does_not_change_the_table(self):
        p = self.problem
        kwargs = dict(seed=2, observables={'sx': SIGMA_X})
        one = run_ensemble(p.model, p.scheme, p.rho0, 0.05, 0.01, 6, threads=1, **kwargs)
        many = run_ensemble(p.model, p.scheme, p.rho0, 0.05, 0.01, 6, threads=3, **kwargs)
        pd.testing.assert_frame_equal(one, many)
        self.assertEqual(list(one.columns), ['t', 'mean_sx', 'stderr_sx', 'n_trajectories'])

    def test_mean_filter_follows_the_lindblad_flow(self):
        p = self.problem
        frame = run_ensemble(
            p.model, p.scheme, p.rho0, horizon=1.0, dt=2e-3, n_trajectories=500, seed=1,
            observables={'sx': SIGMA_X, 'sz': SIGMA_Z},
        )
        for t in (0.2, 0.5, 1.0):
            row = frame.iloc[int(round(t / 2e-3))]
            self.assertAlmostEqual(row['t'], t)
            for name, x in (('sx', SIGMA_X), ('sz', SIGMA_Z)):
                exact = lindblad_expectation(p.model, p.rho0, x, [t])[0].real
                self.assertLess(abs(row[f'mean_{name}'] - exact), 3 * row[f'stderr_{name}'])
