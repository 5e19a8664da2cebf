"""
Super-operators on the vectorized operator space.

Vectorization is column stacking, vec(A X B) = (B^T kron A) vec(X), so a
super-operator on d x d operators is a d^2 x d^2 complex matrix. This module
builds the zeta maps, Lindbladians and the Stratonovich generators of the
Belavkin-Zakai filter, plus the identities relating them.
"""

import enum
import logging
from dataclasses import dataclass, field
from numbers import Number
from typing import NamedTuple, Tuple

import numpy as np

from .exceptions import DimensionMismatchError, NotSelfAdjointError, SchemeError
from .operators import as_operator, dagger, hermitian_check, identity

logger = logging.getLogger(__name__)


def vec(x):
    return np.asarray(x).reshape(-1, order='F')


def unvec(v, dim):
    return np.asarray(v).reshape((dim, dim), order='F')


def _transpose_permutation(dim):
    """Index map realizing vec(X^T) = P vec(X)"""
    idx = np.arange(dim * dim)
    rows, cols = idx % dim, idx // dim
    return rows * dim + cols


@dataclass(frozen=True, eq=False)
class SuperOperator:
    """Linear map on d x d operators stored as a d^2 x d^2 matrix"""
    dim: int
    matrix: np.ndarray = field(repr=False)

    def __post_init__(self):
        mat = np.array(self.matrix, dtype=np.complex128)
        side = self.dim * self.dim
        if mat.shape != (side, side):
            raise DimensionMismatchError(
                f'super-operator on dim {self.dim} needs a {side}x{side} matrix, got {mat.shape}'
            )
        mat.setflags(write=False)
        object.__setattr__(self, 'matrix', mat)

    def __call__(self, x):
        return apply(self, x)

    def _check(self, other):
        if not isinstance(other, SuperOperator) or other.dim != self.dim:
            raise DimensionMismatchError('super-operators act on different spaces')

    def __add__(self, other):
        self._check(other)
        return SuperOperator(self.dim, self.matrix + other.matrix)

    def __sub__(self, other):
        self._check(other)
        return SuperOperator(self.dim, self.matrix - other.matrix)

    def __neg__(self):
        return SuperOperator(self.dim, -self.matrix)

    def __mul__(self, scalar):
        if not isinstance(scalar, Number):
            return NotImplemented
        return SuperOperator(self.dim, scalar * self.matrix)

    __rmul__ = __mul__

    def __matmul__(self, other):
        return compose(self, other)

    def norm(self):
        return float(np.linalg.norm(self.matrix))


def identity_superop(dim):
    return SuperOperator(dim, np.eye(dim * dim))


def zero_superop(dim):
    return SuperOperator(dim, np.zeros((dim * dim, dim * dim)))


def apply(s, x):
    """S(X), un-vectorized"""
    x = np.asarray(x)
    if x.shape != (s.dim, s.dim):
        raise DimensionMismatchError(f'cannot apply a dim-{s.dim} super-operator to shape {x.shape}')
    return unvec(s.matrix @ vec(x), s.dim)


def compose(s1, s2):
    """S1 o S2"""
    s1._check(s2)
    return SuperOperator(s1.dim, s1.matrix @ s2.matrix)


def sbracket(s1, s2):
    """[S1, S2] = S1 o S2 - S2 o S1"""
    s1._check(s2)
    return SuperOperator(s1.dim, s1.matrix @ s2.matrix - s2.matrix @ s1.matrix)


def zeta(a):
    """zeta_A(X) = X A + A^dagger X"""
    a = np.asarray(a, dtype=np.complex128)
    dim = a.shape[0]
    eye = np.eye(dim)
    return SuperOperator(dim, np.kron(a.T, eye) + np.kron(eye, dagger(a)))


def dissipation(s, x, y):
    """D_S(X, Y) = S(XY) - S(X) Y - X S(Y)"""
    x, y = np.asarray(x), np.asarray(y)
    if x.shape != y.shape:
        raise DimensionMismatchError(f'dimension mismatch: {x.shape} vs {y.shape}')
    return apply(s, x @ y) - apply(s, x) @ y - x @ apply(s, y)


class DerivationCheck(NamedTuple):
    is_derivation: bool
    max_defect: float


def is_derivation(s, tol=1e-12):
    """Test the dissipation on every pair of matrix units"""
    if tol <= 0:
        raise ValueError('tol must be positive')
    d = s.dim
    # images[:, :, a, b] = S(E_ab)
    images = s.matrix.reshape(d, d, d, d, order='F')
    worst = 0.0
    for i in range(d):
        for j in range(d):
            s_ij = images[:, :, i, j]
            for k in range(d):
                for l in range(d):
                    product = images[:, :, i, l] if j == k else 0.0
                    # S(E_ij) E_kl keeps column k of S(E_ij) in column l
                    right = np.zeros((d, d), dtype=np.complex128)
                    right[:, l] = s_ij[:, k]
                    left = np.zeros((d, d), dtype=np.complex128)
                    left[i, :] = images[j, :, k, l]
                    defect = np.linalg.norm(product - right - left)
                    worst = max(worst, float(defect))
    return DerivationCheck(is_derivation=worst <= tol, max_defect=worst)


def adjoint(s):
    """Adjoint under the trace pairing tr{S*(rho) X} = tr{rho S(X)}"""
    perm = _transpose_permutation(s.dim)
    return SuperOperator(s.dim, s.matrix.T[np.ix_(perm, perm)])


def _dissipator_matrix(l_op):
    dim = l_op.shape[0]
    eye = np.eye(dim)
    ldl = dagger(l_op) @ l_op
    return (np.kron(l_op.T, dagger(l_op))
            - 0.5 * np.kron(eye, ldl)
            - 0.5 * np.kron(ldl.T, eye))


@dataclass(frozen=True, eq=False)
class ModelSpec:
    """Coupling operators G = (L, H)"""
    dim: int
    L: Tuple[np.ndarray, ...]
    H: np.ndarray = field(repr=False)

    def __post_init__(self):
        h = as_operator(self.H, 'H')
        couplings = tuple(as_operator(l_op, f'L[{k}]') for k, l_op in enumerate(self.L))
        for name, op in [('H', h)] + [(f'L[{k}]', l_op) for k, l_op in enumerate(couplings)]:
            if op.shape[0] != self.dim:
                raise DimensionMismatchError(f'{name} has dimension {op.shape[0]}, model dim is {self.dim}')
        check = hermitian_check(h)
        if check.defect > 1e-12 * max(1.0, float(np.linalg.norm(h))):
            raise NotSelfAdjointError(f'H is not self-adjoint (defect {check.defect:.3e})')
        object.__setattr__(self, 'L', couplings)
        object.__setattr__(self, 'H', h)

    @property
    def n_channels(self):
        return len(self.L)


@dataclass(frozen=True)
class MeasurementScheme:
    """Observed channels A (0-based) and their quadrature phases"""
    observed: Tuple[int, ...] = ()
    theta: Tuple[float, ...] = ()

    def __post_init__(self):
        observed = tuple(int(a) for a in self.observed)
        theta = tuple(float(t) for t in self.theta)
        if len(observed) != len(theta):
            raise SchemeError(f'{len(observed)} observed channels but {len(theta)} phases')
        if len(set(observed)) != len(observed):
            raise SchemeError('observed channels must be distinct')
        object.__setattr__(self, 'observed', observed)
        object.__setattr__(self, 'theta', theta)

    @classmethod
    def complete(cls, n_channels, theta=None):
        if theta is None:
            theta = [0.0] * n_channels
        return cls(observed=tuple(range(n_channels)), theta=tuple(theta))

    def validate(self, model):
        for alpha in self.observed:
            if not 0 <= alpha < model.n_channels:
                raise SchemeError(
                    f'observed channel {alpha + 1} out of range 1..{model.n_channels}'
                )

    def is_complete(self, n_channels):
        return set(self.observed) == set(range(n_channels))

    def unobserved(self, n_channels):
        return [k for k in range(n_channels) if k not in self.observed]

    @property
    def n_observed(self):
        return len(self.observed)


class KForm(enum.Enum):
    """
    Closed forms for the Stratonovich K(G, Theta).

    Only DERIVED satisfies the split identity; the two printed forms flip the
    sign of the L^2 term (and halve it) and are kept as negative controls.
    """
    DERIVED = 'derived'
    FLIPPED_SQUARE = 'paper-2.3'
    FLIPPED_HALF_SQUARE = 'paper-eq-Kcomplete'

    @classmethod
    def _missing_(cls, value):
        return {
            'flipped-square': cls.FLIPPED_SQUARE,
            'flipped-half-square': cls.FLIPPED_HALF_SQUARE,
        }.get(value)

    @classmethod
    def choices(cls):
        """Every accepted spelling, canonical values first"""
        return [k.value for k in cls] + ['flipped-square', 'flipped-half-square']


def lindblad_forms(model):
    """The Lindbladian built three independent ways"""
    d = model.dim
    eye = np.eye(d)
    h = model.H
    direct = -1j * np.kron(h.T, eye) + 1j * np.kron(eye, h)
    for l_op in model.L:
        direct = direct + _dissipator_matrix(l_op)

    k = zeta(k_ito(model))
    kraus = k.matrix.copy()
    squares = k.matrix.copy()
    for l_op in model.L:
        kraus = kraus + np.kron(l_op.T, dagger(l_op))
        z = zeta(l_op)
        squares = squares + 0.5 * (z.matrix @ z.matrix - zeta(l_op @ l_op).matrix)
    return {
        'direct': SuperOperator(d, direct),
        'kraus_zeta': SuperOperator(d, kraus),
        'zeta_squares': SuperOperator(d, squares),
    }


def lindblad(model):
    """L_G X = sum_k {L* X L - L*L X / 2 - X L*L / 2} - i[X, H]"""
    return lindblad_forms(model)['direct']


def k_ito(model):
    """K = -1/2 sum_k L_k* L_k - iH"""
    k = -1j * model.H
    for l_op in model.L:
        k = k - 0.5 * (dagger(l_op) @ l_op)
    return as_operator(k, 'K')


def quadrature_couplings(model, scheme):
    """e^{i theta_a} L_a for each observed channel a"""
    scheme.validate(model)
    return [np.exp(1j * th) * model.L[alpha] for alpha, th in zip(scheme.observed, scheme.theta)]


def k_strat(model, scheme, k_form=KForm.DERIVED):
    """K(G, Theta) = -1/2 sum_{a in A} (L_a* L_a + e^{2i theta_a} L_a^2) - iH"""
    k_form = KForm(k_form)
    scheme.validate(model)
    square_weight = {
        KForm.DERIVED: 1.0,
        KForm.FLIPPED_SQUARE: -1.0,
        KForm.FLIPPED_HALF_SQUARE: -0.5,
    }[k_form]
    k = -1j * model.H
    for alpha, th in zip(scheme.observed, scheme.theta):
        l_op = model.L[alpha]
        k = k - 0.5 * (dagger(l_op) @ l_op + square_weight * np.exp(2j * th) * (l_op @ l_op))
    return as_operator(k, 'K(G, Theta)')


def l_unobs(model, scheme):
    """Lindblad dissipator of the unobserved channels (no Hamiltonian part)"""
    scheme.validate(model)
    d = model.dim
    mat = np.zeros((d * d, d * d), dtype=np.complex128)
    for k in scheme.unobserved(model.n_channels):
        mat = mat + _dissipator_matrix(model.L[k])
    return SuperOperator(d, mat)


def strat_generator(model, scheme):
    """L_G - 1/2 sum_{a in A} zeta_{e^{i theta} L_a} o zeta_{e^{i theta} L_a}"""
    gen = lindblad(model)
    for coupling in quadrature_couplings(model, scheme):
        z = zeta(coupling)
        gen = gen - 0.5 * compose(z, z)
    return gen
