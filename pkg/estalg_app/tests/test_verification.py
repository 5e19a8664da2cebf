import numpy as np
from django.test import SimpleTestCase

from estalg_app.verification import (
    IDENTITIES, check_homomorphism, check_kernel, check_strat_split, random_model, random_scheme,
    run_identity_suite,
)


class IdentitySuiteTests(SimpleTestCase):

    def test_all_identities_hold(self):
        report = run_identity_suite(dims=(2, 3), seeds=4, seed=0)
        self.assertTrue(report.passed, report.failures)
        data = report.to_dict()
        self.assertEqual(set(data['identities']), set(IDENTITIES))
        self.assertEqual(data['identities']['homomorphism']['cases'], 8)
        self.assertTrue(data['pass'])

    def test_printed_sign_is_caught(self):
        report = run_identity_suite(dims=(2, 3), seeds=4, k_form='paper-2.3')
        self.assertEqual(report.failures, ['strat_split'])
        self.assertGreater(report.results['strat_split'].max_defect, 1e-3)

    def test_cases_do_not_depend_on_the_sweep(self):
        small = run_identity_suite(dims=(2,), seeds=2, seed=7)
        large = run_identity_suite(dims=(2, 3), seeds=2, seed=7)
        self.assertLessEqual(
            small.results['kernel'].max_defect, large.results['kernel'].max_defect,
        )

    def test_theorem_cases(self):
        report = run_identity_suite(dims=(2,), seeds=2, theorem=True)
        self.assertIn('theorem_main', report.results)
        self.assertTrue(report.results['theorem_main'].passed)

    def test_homomorphism_on_a_hundred_pairs(self):
        for dim in (2, 3, 4, 6):
            rng = np.random.default_rng(np.random.SeedSequence([11, dim]))
            worst = max(check_homomorphism(rng, dim) for _ in range(100))
            self.assertLessEqual(worst, 1e-12, f'dim {dim}')

    def test_theorem_on_twenty_seeds(self):
        report = run_identity_suite(dims=(2, 3), seeds=20, theorem=True)
        result = report.results['theorem_main']
        self.assertEqual(result.cases, 40)
        self.assertTrue(result.passed)


class RandomModelTests(SimpleTestCase):

    def test_random_scheme(self):
        rng = np.random.default_rng(3)
        scheme = random_scheme(rng, 3, complete=True)
        self.assertEqual(scheme.observed, (0, 1, 2))
        for _ in range(10):
            scheme = random_scheme(rng, 3)
            self.assertLessEqual(scheme.n_observed, 3)
            self.assertEqual(list(scheme.observed), sorted(scheme.observed))

    def test_random_model_is_hermitian(self):
        model = random_model(np.random.default_rng(1), 3, n_channels=2)
        self.assertEqual(model.n_channels, 2)
        np.testing.assert_allclose(model.H, model.H.conj().T)

    def test_single_checks(self):
        rng = np.random.default_rng(6)
        self.assertLess(check_kernel(rng, 3), 1e-12)
        self.assertLess(check_strat_split(rng, 3), 1e-12)
