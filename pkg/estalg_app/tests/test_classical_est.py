from fractions import Fraction

import numpy as np
from django.core.exceptions import ValidationError
from django.test import SimpleTestCase

from estalg_app.classical_est import (
    ClassicalModel, PolyDiffOp, Polynomial, apply_diffop, backward_generator, benes_class,
    classical_closure, completed_square, diffop_bracket, diffop_compose, diffop_degree,
    dmz_generator, formal_adjoint, gauge_field, is_exact, multiplication_operator, parse_classical_model,
    partial, potential_phi, sensor_drift,
)
from estalg_app.exceptions import ClosureInputError, DegreeGuardError, NonPolynomialModelError
from estalg_app.lie_engine import ClosureOutcome
from estalg_app.utils import load_classical_input


def random_diffop(rng, n_vars, max_power=2, n_terms=3):
    terms = []
    for _ in range(n_terms):
        j = tuple(int(a) for a in rng.integers(0, max_power + 1, n_vars))
        k = tuple(int(b) for b in rng.integers(0, max_power + 1, n_vars))
        terms.append(((j, k), Fraction(int(rng.integers(-5, 6)), int(rng.integers(1, 4)))))
    return PolyDiffOp(n_vars, terms)


class PolynomialTests(SimpleTestCase):

    def test_arithmetic(self):
        x = Polynomial.variable(1, 0)
        self.assertEqual((x + 1) ** 2, x * x + 2 * x + 1)
        self.assertEqual((x - x).degree, -1)
        self.assertTrue((x - x).is_zero())
        self.assertEqual((x ** 3).partial(0), 3 * x * x)

    def test_two_variables(self):
        x1, x2 = Polynomial.variable(2, 0), Polynomial.variable(2, 1)
        p = x1 * x2 + x2 ** 2
        self.assertEqual(p.degree, 2)
        self.assertEqual(p.partial(1), x1 + 2 * x2)

    def test_from_list(self):
        p = Polynomial.from_list(1, [{'coeff': [1, 2], 'powers': [2]}, {'coeff': '3/4', 'powers': [0]}])
        x = Polynomial.variable(1, 0)
        self.assertEqual(p, Fraction(1, 2) * x * x + Fraction(3, 4))

    def test_expression_rejected(self):
        with self.assertRaises(NonPolynomialModelError):
            Polynomial.from_list(1, 'tanh(x)')

    def test_bad_term_names_field(self):
        with self.assertRaisesMessage(ValidationError, 'h[0][1].powers'):
            Polynomial.from_list(1, [{'coeff': 1, 'powers': [1]}, {'coeff': 1, 'powers': [1, 2]}], 'h[0]')


class DiffOpTests(SimpleTestCase):

    def test_canonical_commutator(self):
        x = multiplication_operator(Polynomial.variable(1, 0))
        d = partial(1, 0)
        one = PolyDiffOp(1, {((0,), (0,)): 1})
        self.assertEqual(diffop_bracket(d, x), one)

    def test_leibniz(self):
        # d^2 o x^2 = x^2 d^2 + 4 x d + 2
        x2 = multiplication_operator(Polynomial.variable(1, 0) ** 2)
        expected = PolyDiffOp(1, {((2,), (2,)): 1, ((1,), (1,)): 4, ((0,), (0,)): 2})
        self.assertEqual(diffop_compose(partial(1, 0, 2), x2), expected)

    def test_composition_matches_application(self):
        rng = np.random.default_rng(1)
        f = Polynomial.from_list(2, [{'coeff': 2, 'powers': [3, 1]}, {'coeff': -1, 'powers': [0, 2]}])
        for _ in range(5):
            p, q = random_diffop(rng, 2), random_diffop(rng, 2)
            self.assertEqual(apply_diffop(p @ q, f), apply_diffop(p, apply_diffop(q, f)))

    def test_jacobi(self):
        rng = np.random.default_rng(2)
        for _ in range(5):
            a, b, c = (random_diffop(rng, 1) for _ in range(3))
            total = (diffop_bracket(a, diffop_bracket(b, c)) + diffop_bracket(b, diffop_bracket(c, a))
                     + diffop_bracket(c, diffop_bracket(a, b)))
            self.assertTrue(total.is_zero())

    def test_formal_adjoint_is_an_involution(self):
        rng = np.random.default_rng(3)
        p = random_diffop(rng, 2)
        self.assertEqual(formal_adjoint(formal_adjoint(p)), p)

    def test_degree_and_text(self):
        op = PolyDiffOp(1, {((2,), (1,)): Fraction(-1, 2), ((0,), (0,)): 3})
        self.assertEqual(diffop_degree(op), 3)
        self.assertEqual(diffop_degree(PolyDiffOp(1)), -1)
        self.assertEqual(str(op), '-1/2 x^2 d + 3')
        self.assertEqual(PolyDiffOp.from_dict(op.to_dict()), op)


class ModelTests(SimpleTestCase):

    def test_kalman_generator(self):
        model = load_classical_input(preset='kalman-1d')
        # 1/2 d^2 + x d + 1 - 1/2 x^2
        expected = PolyDiffOp(1, {
            ((0,), (2,)): Fraction(1, 2), ((1,), (1,)): 1, ((0,), (0,)): 1, ((2,), (0,)): Fraction(-1, 2),
        })
        self.assertEqual(dmz_generator(model), expected)

    def test_forward_generator_is_adjoint_of_backward(self):
        for preset in ('kalman-1d', 'cubic-sensor', 'rotational-2d'):
            model = load_classical_input(preset=preset)
            self.assertEqual(formal_adjoint(backward_generator(model)), dmz_generator(model))

    def test_sensor_drift(self):
        kalman = load_classical_input(preset='kalman-1d')
        x = Polynomial.variable(1, 0)
        self.assertEqual(sensor_drift(kalman), [-x])
        self.assertEqual(str(backward_generator(kalman)), '-1/2 x^2 - x d + 1/2 d^2')
        # 1/2 (x^3)'' = 3x for the driftless cubic sensor
        cubic = load_classical_input(preset='cubic-sensor')
        self.assertEqual([str(p) for p in sensor_drift(cubic)], ['3 x'])

    def test_completed_square(self):
        x1, x2 = Polynomial.variable(2, 0), Polynomial.variable(2, 1)
        model = ClassicalModel(
            n_vars=2, v=(x2 * x2 - x1, x1 * x2 ** 3), h=(x1 + x2 ** 2,), gamma0=Fraction(3, 2),
        )
        self.assertEqual(completed_square(model), dmz_generator(model))
        for preset in ('kalman-1d', 'rotational-2d'):
            model = load_classical_input(preset=preset)
            self.assertEqual(completed_square(model), dmz_generator(model))

    def test_rotational_gauge_field(self):
        model = load_classical_input(preset='rotational-2d')
        field = gauge_field(model)
        self.assertEqual(field[0][1], Polynomial.constant(2, -2))
        self.assertEqual(field[1][0], Polynomial.constant(2, 2))
        self.assertTrue(field[0][0].is_zero())
        self.assertFalse(is_exact(model))
        verdict = benes_class(model)
        self.assertFalse(verdict)
        self.assertIn('gauge field is not identically zero', verdict.reasons)

    def test_kalman_is_benes(self):
        model = load_classical_input(preset='kalman-1d')
        self.assertTrue(is_exact(model))
        self.assertEqual(potential_phi(model).degree, 2)
        self.assertTrue(benes_class(model).is_benes)

    def test_cubic_sensor_is_not_benes(self):
        verdict = benes_class(load_classical_input(preset='cubic-sensor'))
        self.assertFalse(verdict.is_benes)
        self.assertIn('h[0] has degree 3 > 1', verdict.reasons)

    def test_parse_errors_name_fields(self):
        with self.assertRaisesMessage(ValidationError, 'v: expected 2 components'):
            parse_classical_model({'n_vars': 2, 'v': [[]], 'h': []})
        with self.assertRaisesMessage(ValidationError, 'gamma0'):
            parse_classical_model({'n_vars': 1, 'v': [[]], 'h': [], 'gamma0': 0})
        with self.assertRaises(NonPolynomialModelError):
            parse_classical_model({'n_vars': 1, 'v': ['tanh(x)'], 'h': []})


class ClosureTests(SimpleTestCase):

    def test_kalman_closure_has_dimension_four(self):
        model = load_classical_input(preset='kalman-1d')
        for cap in (10, 20, 40):
            report = classical_closure(model, cap=cap)
            self.assertEqual(report.outcome, ClosureOutcome.FINITE)
            self.assertEqual(report.dimension, 4)
            self.assertEqual(report.growth_trace, (2, 3, 4))
            self.assertEqual(len(report.basis), 4)

    def test_rotational_closure_is_finite(self):
        report = classical_closure(load_classical_input(preset='rotational-2d'), cap=40)
        self.assertTrue(report.is_finite)

    def test_cubic_sensor_exceeds_the_cap(self):
        report = classical_closure(load_classical_input(preset='cubic-sensor'), cap=40)
        self.assertEqual(report.outcome, ClosureOutcome.CAP_EXCEEDED)
        self.assertGreater(report.dimension, 40)
        trace = report.growth_trace
        self.assertTrue(all(a < b for a, b in zip(trace, trace[1:])))
        self.assertEqual(report.basis, ())
        self.assertNotIn('basis', report.to_dict())

    def test_degree_guard(self):
        with self.assertRaises(DegreeGuardError) as cm:
            classical_closure(load_classical_input(preset='cubic-sensor'), degree_guard=5)
        self.assertEqual(cm.exception.degree, 6)

    def test_cap_must_allow_two_generators(self):
        with self.assertRaises(ClosureInputError):
            classical_closure(load_classical_input(preset='kalman-1d'), cap=1)
