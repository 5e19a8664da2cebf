"""
Classical estimation algebras of polynomial filtering models.

Model: dX = v(X) dt + gamma0 dW, dY = h(X) dt + dZ, with v and h polynomial
over the rationals. Differential operators sum_{j,k} c x^j d^k are kept as
sparse maps (j, k) -> Fraction, so every bracket and rank decision is exact.
"""

import itertools
import logging
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Tuple

from django.core.exceptions import ValidationError

from .conf import estalg_setting
from .exceptions import (
    ClosureInputError, DegreeGuardError, DimensionMismatchError, NonPolynomialModelError,
)
from .lie_engine import ClosureOutcome

logger = logging.getLogger(__name__)


def _accumulate(target, items, coef=1):
    """target += coef * items, dropping zero coefficients"""
    if coef == 0:
        return target
    for key, x in items:
        if x == 0:
            continue
        y = target.get(key, 0) + coef * x
        if y == 0:
            target.pop(key, None)
        else:
            target[key] = y
    return target


def _fraction(value, name):
    if isinstance(value, Fraction):
        return value
    if isinstance(value, bool):
        raise ValidationError(f'{name}: expected a number, got {value!r}')
    if isinstance(value, int):
        return Fraction(value)
    if isinstance(value, (list, tuple)) and len(value) == 2 and all(
            isinstance(p, int) and not isinstance(p, bool) for p in value):
        if value[1] == 0:
            raise ValidationError(f'{name}: zero denominator')
        return Fraction(value[0], value[1])
    if isinstance(value, str):
        try:
            return Fraction(value)
        except ValueError:
            pass
    raise ValidationError(f'{name}: expected an integer, [num, den] or "p/q", got {value!r}')


def _encode_fraction(x):
    return [x.numerator, x.denominator]


class Polynomial:
    """Sparse multivariate polynomial with rational coefficients"""

    __slots__ = ('n_vars', 'terms')

    def __init__(self, n_vars, terms=()):
        self.n_vars = n_vars
        items = terms.items() if isinstance(terms, dict) else terms
        clean = {}
        for powers, c in items:
            powers = tuple(int(p) for p in powers)
            if len(powers) != n_vars or any(p < 0 for p in powers):
                raise DimensionMismatchError(f'bad exponent {powers} for {n_vars} variables')
            _accumulate(clean, [(powers, Fraction(c))])
        self.terms = clean

    @classmethod
    def constant(cls, n_vars, c):
        return cls(n_vars, {(0,) * n_vars: c})

    @classmethod
    def variable(cls, n_vars, i):
        powers = [0] * n_vars
        powers[i] = 1
        return cls(n_vars, {tuple(powers): 1})

    def _check(self, other):
        if other.n_vars != self.n_vars:
            raise DimensionMismatchError(f'{self.n_vars} vs {other.n_vars} variables')

    def _coerce(self, other):
        if isinstance(other, Polynomial):
            self._check(other)
            return other
        if isinstance(other, (int, Fraction)):
            return Polynomial.constant(self.n_vars, other)
        return NotImplemented

    def __add__(self, other):
        other = self._coerce(other)
        if other is NotImplemented:
            return other
        return Polynomial(self.n_vars, _accumulate(dict(self.terms), other.terms.items()))

    __radd__ = __add__

    def __neg__(self):
        return Polynomial(self.n_vars, {p: -c for p, c in self.terms.items()})

    def __sub__(self, other):
        other = self._coerce(other)
        if other is NotImplemented:
            return other
        return Polynomial(self.n_vars, _accumulate(dict(self.terms), other.terms.items(), -1))

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, other):
        other = self._coerce(other)
        if other is NotImplemented:
            return other
        out = {}
        for p, a in self.terms.items():
            for q, b in other.terms.items():
                _accumulate(out, [(tuple(x + y for x, y in zip(p, q)), a * b)])
        return Polynomial(self.n_vars, out)

    __rmul__ = __mul__

    def __pow__(self, n):
        result = Polynomial.constant(self.n_vars, 1)
        for _ in range(n):
            result = result * self
        return result

    def __eq__(self, other):
        if isinstance(other, (int, Fraction)):
            other = Polynomial.constant(self.n_vars, other)
        if not isinstance(other, Polynomial):
            return NotImplemented
        return self.n_vars == other.n_vars and self.terms == other.terms

    def __hash__(self):
        return hash((self.n_vars, frozenset(self.terms.items())))

    def is_zero(self):
        return not self.terms

    @property
    def degree(self):
        """Total degree; -1 for the zero polynomial"""
        return max((sum(p) for p in self.terms), default=-1)

    def partial(self, i):
        out = {}
        for p, c in self.terms.items():
            if p[i]:
                q = list(p)
                q[i] -= 1
                _accumulate(out, [(tuple(q), c * p[i])])
        return Polynomial(self.n_vars, out)

    def to_list(self):
        return [{'coeff': _encode_fraction(c), 'powers': list(p)}
                for p, c in sorted(self.terms.items(), key=lambda t: (-sum(t[0]), t[0]))]

    @classmethod
    def from_list(cls, n_vars, data, name='polynomial'):
        if isinstance(data, str):
            raise NonPolynomialModelError(
                f'{name} is given as the expression {data!r}; only polynomial models are supported'
            )
        if not isinstance(data, list):
            raise ValidationError(f'{name}: expected a list of terms')
        terms = []
        for n, term in enumerate(data):
            where = f'{name}[{n}]'
            if not isinstance(term, dict) or 'powers' not in term or 'coeff' not in term:
                raise ValidationError(f'{where}: each term needs "coeff" and "powers"')
            powers = term['powers']
            if (not isinstance(powers, list) or len(powers) != n_vars
                    or any(not isinstance(p, int) or p < 0 for p in powers)):
                raise ValidationError(f'{where}.powers: expected {n_vars} non-negative integers')
            terms.append((tuple(powers), _fraction(term['coeff'], f'{where}.coeff')))
        return cls(n_vars, terms)

    def __str__(self):
        return _format_terms(self.n_vars, ((p, None, c) for p, c in self.terms.items()))

    def __repr__(self):
        return f'Polynomial({self})'


def _term_order(key):
    """Graded lexicographic order on (x powers, d powers)"""
    j, k = key
    return (sum(j) + sum(k), j + k)


def _format_terms(n_vars, triples):
    def name(base, i):
        return base if n_vars == 1 else f'{base}{i + 1}'

    parts = []
    for j, k, c in sorted(triples, key=lambda t: _term_order((t[0], t[1] or ())), reverse=True):
        factors = []
        for base, powers in (('x', j), ('d', k or ())):
            for i, p in enumerate(powers):
                if p:
                    factors.append(name(base, i) + (f'^{p}' if p > 1 else ''))
        coeff = '' if factors and abs(c) == 1 else str(abs(c))
        body = ' '.join(([coeff] if coeff else []) + factors)
        parts.append(('- ' if c < 0 else '+ ') + body)
    if not parts:
        return '0'
    text = ' '.join(parts)
    return text[2:] if text.startswith('+ ') else '-' + text[2:]


class PolyDiffOp:
    """sum c_{j,k} x^j d^k, the d^k acting first"""

    __slots__ = ('n_vars', 'terms')

    def __init__(self, n_vars, terms=()):
        self.n_vars = n_vars
        items = terms.items() if isinstance(terms, dict) else terms
        clean = {}
        for (j, k), c in items:
            j, k = tuple(int(a) for a in j), tuple(int(b) for b in k)
            if len(j) != n_vars or len(k) != n_vars:
                raise DimensionMismatchError(f'multi-indices must have length {n_vars}')
            _accumulate(clean, [((j, k), Fraction(c))])
        self.terms = clean

    def _check(self, other):
        if not isinstance(other, PolyDiffOp) or other.n_vars != self.n_vars:
            raise DimensionMismatchError('operators act on different numbers of variables')

    def __add__(self, other):
        self._check(other)
        return PolyDiffOp(self.n_vars, _accumulate(dict(self.terms), other.terms.items()))

    def __sub__(self, other):
        self._check(other)
        return PolyDiffOp(self.n_vars, _accumulate(dict(self.terms), other.terms.items(), -1))

    def __neg__(self):
        return PolyDiffOp(self.n_vars, {key: -c for key, c in self.terms.items()})

    def __mul__(self, scalar):
        if not isinstance(scalar, (int, Fraction)):
            return NotImplemented
        return PolyDiffOp(self.n_vars, {key: c * scalar for key, c in self.terms.items()})

    __rmul__ = __mul__

    def __matmul__(self, other):
        return diffop_compose(self, other)

    def __eq__(self, other):
        if not isinstance(other, PolyDiffOp):
            return NotImplemented
        return self.n_vars == other.n_vars and self.terms == other.terms

    def __hash__(self):
        return hash((self.n_vars, frozenset(self.terms.items())))

    def is_zero(self):
        return not self.terms

    def __str__(self):
        return _format_terms(self.n_vars, ((j, k, c) for (j, k), c in self.terms.items()))

    def __repr__(self):
        return f'PolyDiffOp({self})'

    def to_dict(self):
        terms = sorted(self.terms.items(), key=lambda t: _term_order(t[0]), reverse=True)
        return {
            'n_vars': self.n_vars,
            'terms': [{'coeff': _encode_fraction(c), 'x': list(j), 'd': list(k)} for (j, k), c in terms],
        }

    @classmethod
    def from_dict(cls, data):
        n_vars = data['n_vars']
        return cls(n_vars, [
            ((tuple(t['x']), tuple(t['d'])), _fraction(t['coeff'], 'coeff')) for t in data['terms']
        ])


def diffop_degree(op):
    """max |j| + |k| over the terms; -1 for the zero operator"""
    return max((sum(j) + sum(k) for j, k in op.terms), default=-1)


def multiplication_operator(poly):
    zero = (0,) * poly.n_vars
    return PolyDiffOp(poly.n_vars, {(p, zero): c for p, c in poly.terms.items()})


def partial(n_vars, i, order=1):
    k = [0] * n_vars
    k[i] = order
    return PolyDiffOp(n_vars, {((0,) * n_vars, tuple(k)): 1})


def _compose_terms(a, b, c, e):
    """x^a d^b o x^c d^e as (powers, coefficient) pairs (Leibniz rule)"""
    ranges = [range(min(bi, ci) + 1) for bi, ci in zip(b, c)]
    for m in itertools.product(*ranges):
        coeff = 1
        for bi, ci, mi in zip(b, c, m):
            coeff *= math.comb(bi, mi) * math.perm(ci, mi)
        j = tuple(ai + ci - mi for ai, ci, mi in zip(a, c, m))
        k = tuple(bi - mi + ei for bi, mi, ei in zip(b, m, e))
        yield (j, k), coeff


def diffop_compose(p, q):
    """P o Q"""
    p._check(q)
    out = {}
    for (a, b), c1 in p.terms.items():
        for (c, e), c2 in q.terms.items():
            _accumulate(out, _compose_terms(a, b, c, e), c1 * c2)
    return PolyDiffOp(p.n_vars, out)


def diffop_bracket(p, q):
    """[P, Q] = PQ - QP"""
    return diffop_compose(p, q) - diffop_compose(q, p)


def apply_diffop(op, poly):
    """P(f) for a polynomial f"""
    if op.n_vars != poly.n_vars:
        raise DimensionMismatchError('operator and polynomial have different numbers of variables')
    result = Polynomial(poly.n_vars)
    for (j, k), c in op.terms.items():
        g = poly
        for i, order in enumerate(k):
            for _ in range(order):
                g = g.partial(i)
        result = result + Polynomial(poly.n_vars, {j: c}) * g
    return result


def formal_adjoint(op):
    """Adjoint under int f g dx: (x^j d^k)^dagger = (-1)^|k| d^k o x^j"""
    n = op.n_vars
    zero = (0,) * n
    out = PolyDiffOp(n)
    for (j, k), c in op.terms.items():
        d_k = PolyDiffOp(n, {(zero, k): (-1) ** sum(k) * c})
        out = out + diffop_compose(d_k, PolyDiffOp(n, {(j, zero): 1}))
    return out


@dataclass(frozen=True, eq=False)
class ClassicalModel:
    """dX = v(X) dt + gamma0 dW, dY = h(X) dt + dZ"""
    n_vars: int
    v: Tuple[Polynomial, ...]
    h: Tuple[Polynomial, ...]
    gamma0: Fraction = Fraction(1)

    def __post_init__(self):
        if self.n_vars < 1:
            raise ValidationError('n_vars must be at least 1')
        gamma0 = Fraction(self.gamma0)
        if gamma0 <= 0:
            raise ValidationError('gamma0 must be positive')
        v, h = tuple(self.v), tuple(self.h)
        if len(v) != self.n_vars:
            raise DimensionMismatchError(f'drift has {len(v)} components for {self.n_vars} variables')
        for poly in v + h:
            if poly.n_vars != self.n_vars:
                raise DimensionMismatchError('model polynomials use a different number of variables')
        object.__setattr__(self, 'v', v)
        object.__setattr__(self, 'h', h)
        object.__setattr__(self, 'gamma0', gamma0)

    def to_dict(self):
        return {
            'n_vars': self.n_vars,
            'v': [p.to_list() for p in self.v],
            'h': [p.to_list() for p in self.h],
            'gamma0': _encode_fraction(self.gamma0),
        }


def parse_classical_model(data):
    """
    Build a ClassicalModel from its JSON form.

    Field problems raise ValidationError naming the field; drifts or sensors
    written as expressions (e.g. "tanh(x)") raise NonPolynomialModelError.
    """
    if not isinstance(data, dict):
        raise ValidationError('classical model must be a JSON object')
    for key in ('n_vars', 'v', 'h'):
        if key not in data:
            raise ValidationError(f'{key}: field is required')
    n_vars = data['n_vars']
    if not isinstance(n_vars, int) or isinstance(n_vars, bool) or n_vars < 1:
        raise ValidationError('n_vars: expected a positive integer')
    for key in ('v', 'h'):
        if not isinstance(data[key], list):
            raise ValidationError(f'{key}: expected a list of polynomials')
    v = tuple(Polynomial.from_list(n_vars, p, f'v[{i}]') for i, p in enumerate(data['v']))
    h = tuple(Polynomial.from_list(n_vars, p, f'h[{i}]') for i, p in enumerate(data['h']))
    if len(v) != n_vars:
        raise ValidationError(f'v: expected {n_vars} components, got {len(v)}')
    gamma0 = _fraction(data.get('gamma0', 1), 'gamma0')
    if gamma0 <= 0:
        raise ValidationError('gamma0: must be positive')
    return ClassicalModel(n_vars=n_vars, v=v, h=h, gamma0=gamma0)


def _sum_squares(polys, n_vars):
    total = Polynomial(n_vars)
    for p in polys:
        total = total + p * p
    return total


def dmz_generator(model):
    """L0* = 1/2 gamma0^2 Laplacian - div(v .) - 1/2 |h|^2"""
    n = model.n_vars
    op = PolyDiffOp(n)
    half_var = model.gamma0 ** 2 / 2
    for i in range(n):
        op = op + half_var * partial(n, i, 2)
        op = op - diffop_compose(partial(n, i), multiplication_operator(model.v[i]))
    return op - Fraction(1, 2) * multiplication_operator(_sum_squares(model.h, n))


def diffusion_generator(model):
    """1/2 gamma0^2 Laplacian + v . grad, the backward Kolmogorov operator of X"""
    n = model.n_vars
    op = PolyDiffOp(n)
    for i in range(n):
        op = op + model.gamma0 ** 2 / 2 * partial(n, i, 2)
        op = op + diffop_compose(multiplication_operator(model.v[i]), partial(n, i))
    return op


def backward_generator(model):
    """Diffusion generator - 1/2 |h|^2, the formal adjoint of L0*"""
    squares = _sum_squares(model.h, model.n_vars)
    return diffusion_generator(model) - Fraction(1, 2) * multiplication_operator(squares)


def sensor_drift(model):
    """A h_k for every sensor component: the dt part of d h_k(X_t) by Ito's formula"""
    generator = diffusion_generator(model)
    return [apply_diffop(generator, h) for h in model.h]


def gauge_field(model):
    """F[i][j] = dv_i/dx_j - dv_j/dx_i"""
    n = model.n_vars
    return [[model.v[i].partial(j) - model.v[j].partial(i) for j in range(n)] for i in range(n)]


def potential_phi(model):
    """Phi = 1/2 (|h|^2 + div v + gamma0^-2 |v|^2)"""
    n = model.n_vars
    div = Polynomial(n)
    for i in range(n):
        div = div + model.v[i].partial(i)
    total = _sum_squares(model.h, n) + div + _sum_squares(model.v, n) * (1 / model.gamma0 ** 2)
    return total * Fraction(1, 2)


def is_exact(model):
    return all(entry.is_zero() for row in gauge_field(model) for entry in row)


@dataclass(frozen=True)
class BenesVerdict:
    is_benes: bool
    reasons: Tuple[str, ...] = ()

    def __bool__(self):
        return self.is_benes


def benes_class(model):
    """Exact, linear sensor and a potential of degree at most two"""
    reasons = []
    if not is_exact(model):
        reasons.append('gauge field is not identically zero')
    for i, h in enumerate(model.h):
        if h.degree > 1:
            reasons.append(f'h[{i}] has degree {h.degree} > 1')
    phi_degree = potential_phi(model).degree
    if phi_degree > 2:
        reasons.append(f'potential has degree {phi_degree} > 2')
    return BenesVerdict(is_benes=not reasons, reasons=tuple(reasons))


def completed_square(model):
    """1/2 gamma0^2 sum_i D_i o D_i - Phi with D_i = d_i - gamma0^-2 v_i"""
    n = model.n_vars
    inv_var = 1 / model.gamma0 ** 2
    op = PolyDiffOp(n)
    for i in range(n):
        d_i = partial(n, i) - inv_var * multiplication_operator(model.v[i])
        op = op + model.gamma0 ** 2 / 2 * diffop_compose(d_i, d_i)
    return op - multiplication_operator(potential_phi(model))


class _RationalEchelon:
    """Reduced row echelon form over Q, pivots at the graded-lex leading term"""

    def __init__(self):
        self.rows = {}

    def __len__(self):
        return len(self.rows)

    def reduce(self, terms):
        vec = dict(terms)
        # rows are fully reduced, so one pass clears every pivot
        for pivot, row in self.rows.items():
            c = vec.get(pivot)
            if c:
                _accumulate(vec, row.items(), -c)
        return vec

    def offer(self, terms):
        vec = self.reduce(terms)
        if not vec:
            return False
        pivot = max(vec, key=_term_order)
        lead = vec[pivot]
        vec = {key: c / lead for key, c in vec.items()}
        for row in self.rows.values():
            c = row.get(pivot)
            if c:
                _accumulate(row, vec.items(), -c)
        self.rows[pivot] = vec
        return True


@dataclass(frozen=True, eq=False)
class SymbolicClosureReport:
    outcome: ClosureOutcome
    dimension: int
    growth_trace: Tuple[int, ...]
    bracket_count: int
    max_degree: int
    basis: Tuple[PolyDiffOp, ...] = field(default=(), repr=False)

    @property
    def is_finite(self):
        return self.outcome is ClosureOutcome.FINITE

    def to_dict(self):
        data = {
            'outcome': self.outcome.value,
            'dimension': self.dimension,
            'growth_trace': list(self.growth_trace),
            'bracket_count': self.bracket_count,
            'max_degree': self.max_degree,
        }
        if self.is_finite:
            data['basis'] = [str(op) for op in self.basis]
            data['basis_terms'] = [op.to_dict() for op in self.basis]
        return data


def classical_closure(model, cap=40, degree_guard=None):
    """Lie{L0*, h_1, ..., h_m} over Q"""
    if cap < 2:
        raise ClosureInputError('cap must be at least 2')
    degree_guard = estalg_setting('DEGREE_GUARD') if degree_guard is None else degree_guard
    generators = [dmz_generator(model)] + [multiplication_operator(h) for h in model.h]

    echelon = _RationalEchelon()
    basis = []
    max_degree = -1

    def _offer(op):
        nonlocal max_degree
        degree = diffop_degree(op)
        if degree > degree_guard:
            raise DegreeGuardError(
                f'bracket of degree {degree} exceeds the guard {degree_guard}', degree=degree,
            )
        if echelon.offer(op.terms):
            basis.append(op)
            max_degree = max(max_degree, degree)
            return True
        return False

    for op in generators:
        _offer(op)
    growth = [len(basis)]
    brackets = 0

    def _report(outcome):
        if outcome is ClosureOutcome.CAP_EXCEEDED:
            logger.warning('symbolic closure exceeded cap %d (trace %s)', cap, growth)
        return SymbolicClosureReport(
            outcome=outcome, dimension=len(basis), growth_trace=tuple(growth),
            bracket_count=brackets, max_degree=max_degree,
            basis=tuple(basis) if outcome is ClosureOutcome.FINITE else (),
        )

    if len(basis) > cap:
        return _report(ClosureOutcome.CAP_EXCEEDED)

    done = 0
    while True:
        size = len(basis)
        for j in range(done, size):
            for i in range(j):
                brackets += 1
                if _offer(diffop_bracket(basis[i], basis[j])) and len(basis) > cap:
                    growth.append(len(basis))
                    return _report(ClosureOutcome.CAP_EXCEEDED)
        done = size
        logger.debug('symbolic sweep: %d -> %d (max degree %d)', size, len(basis), max_degree)
        if len(basis) == size:
            break
        growth.append(len(basis))

    logger.info('symbolic closure finite: dimension %d after %d brackets', len(basis), brackets)
    return _report(ClosureOutcome.FINITE)
