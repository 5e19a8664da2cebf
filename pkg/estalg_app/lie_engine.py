"""
Real Lie closures of complex matrices.

Spans are taken over the reals with inner product Re tr(A^dagger B): a complex
N x N matrix is handled as the real vector [Re A, Im A] of length 2N^2. The
same engine serves operators (d x d) and super-operators (d^2 x d^2).
"""

import enum
import logging
from dataclasses import dataclass, field
from typing import Optional, Tuple

import numpy as np
import scipy.linalg

from .conf import estalg_setting
from .exceptions import (
    ChartBreakdownError, ClosureInputError, IncompleteSchemeError, NotClosedError,
)
from .operators import identity
from .superops import k_strat, quadrature_couplings, strat_generator, zeta

logger = logging.getLogger(__name__)


def realify(m):
    m = np.asarray(m, dtype=np.complex128)
    return np.concatenate([m.real.ravel(), m.imag.ravel()])


def complexify(v, shape):
    half = v.size // 2
    return (v[:half] + 1j * v[half:]).reshape(shape)


class _RealSpan:
    """Incrementally grown orthonormal basis under the real HS inner product"""

    def __init__(self, length):
        self.rows = np.zeros((0, length))

    def __len__(self):
        return self.rows.shape[0]

    def residual(self, v):
        # two passes of classical Gram-Schmidt
        r = v - self.rows.T @ (self.rows @ v)
        return r - self.rows.T @ (self.rows @ r)

    def offer(self, v, threshold):
        r = self.residual(v)
        norm = float(np.linalg.norm(r))
        if norm <= threshold:
            return False
        self.rows = np.vstack([self.rows, r / norm])
        return True


@dataclass(frozen=True, eq=False)
class LieBasis:
    """Orthonormal real basis of a matrix Lie algebra with its structure constants"""
    elements: Tuple[np.ndarray, ...] = field(repr=False)
    structure: np.ndarray = field(repr=False)
    residual: float
    tolerance: float

    @property
    def dimension(self):
        return len(self.elements)

    @property
    def shape(self):
        return self.elements[0].shape if self.elements else None

    @classmethod
    def from_elements(cls, elements, tol=None):
        """Wrap matrices that are already orthonormal under Re tr(A^dagger B)"""
        tol = estalg_setting('DEFAULT_TOL') if tol is None else tol
        elements = tuple(np.array(e, dtype=np.complex128) for e in elements)
        for e in elements:
            e.setflags(write=False)
        if elements:
            vecs = np.array([realify(e) for e in elements])
            gram = vecs @ vecs.T
            defect = float(np.max(np.abs(gram - np.eye(len(elements)))))
            if defect > 1e-10:
                raise ClosureInputError(f'elements are not orthonormal (Gram defect {defect:.3e})')
        structure, residual = _bracket_table(elements)
        return cls(elements=elements, structure=structure, residual=residual, tolerance=tol)

    def vectors(self):
        if not self.elements:
            return np.zeros((0, 0))
        return np.array([realify(e) for e in self.elements])

    def is_closed(self):
        return self.residual <= self.tolerance


def _bracket_table(elements):
    n = len(elements)
    structure = np.zeros((n, n, n))
    if n == 0:
        return structure, 0.0
    vecs = np.array([realify(e) for e in elements])
    residual = 0.0
    for i in range(n):
        for j in range(i + 1, n):
            b = realify(elements[i] @ elements[j] - elements[j] @ elements[i])
            coords = vecs @ b
            structure[i, j] = coords
            structure[j, i] = -coords
            residual = max(residual, float(np.linalg.norm(b - vecs.T @ coords)))
    return structure, residual


def structure_constants(basis):
    """c[i][j][k] = Re tr(X_k^dagger [X_i, X_j])"""
    if not basis.is_closed():
        raise NotClosedError(
            f'basis is not closed (residual {basis.residual:.3e} > {basis.tolerance:.3e})',
            residual=basis.residual,
        )
    return basis.structure.copy()


def coordinates(basis, m):
    return basis.vectors() @ realify(m)


def _in_span(rows, v, tol):
    scale = float(np.linalg.norm(v))
    if scale == 0.0:
        return True
    if len(rows) == 0:
        return False
    r = v - rows.T @ (rows @ v)
    return float(np.linalg.norm(r)) / scale <= tol


def contains(basis, m, tol=None):
    """True if m lies in the real span of the basis (relative residual)"""
    tol = basis.tolerance if tol is None else tol
    return _in_span(basis.vectors(), realify(m), tol)


class ClosureOutcome(enum.Enum):
    FINITE = 'finite'
    CAP_EXCEEDED = 'cap_exceeded'


@dataclass(frozen=True, eq=False)
class ClosureReport:
    """Result of a bracket closure run"""
    outcome: ClosureOutcome
    dimension: int
    growth_trace: Tuple[int, ...]
    tolerance: Optional[float]
    bracket_count: int
    basis: Optional[LieBasis] = field(default=None, repr=False)
    elements: tuple = field(default=(), repr=False)

    @property
    def is_finite(self):
        return self.outcome is ClosureOutcome.FINITE

    def to_dict(self):
        data = {
            'outcome': self.outcome.value,
            'dimension': self.dimension,
            'growth_trace': list(self.growth_trace),
            'tolerance': self.tolerance,
            'bracket_count': self.bracket_count,
        }
        if self.is_finite and self.basis is not None:
            data['structure_constants'] = self.basis.structure.tolist()
            data['residual'] = self.basis.residual
        return data


def closure(generators, tol=None, cap=None):
    """Real Lie closure of a list of equally shaped complex matrices"""
    tol = estalg_setting('DEFAULT_TOL') if tol is None else float(tol)
    mats = [np.asarray(g, dtype=np.complex128) for g in generators]
    if not mats:
        raise ClosureInputError('closure needs at least one generator')
    shape = mats[0].shape
    if len(shape) != 2 or shape[0] != shape[1]:
        raise ClosureInputError(f'generators must be square matrices, got shape {shape}')
    if any(m.shape != shape for m in mats):
        raise ClosureInputError('generators have different shapes')
    if tol <= 0:
        raise ClosureInputError('tol must be positive')
    if cap is None:
        cap = 2 * shape[0] * shape[0]
    if cap < 1:
        raise ClosureInputError('cap must be at least 1')

    scale = max(float(np.linalg.norm(m)) for m in mats) or 1.0
    threshold = tol * scale
    span = _RealSpan(2 * shape[0] * shape[1])
    for m in mats:
        span.offer(realify(m), threshold)

    growth = [len(span)]
    brackets = 0

    def _cap_exceeded():
        logger.warning('closure exceeded cap %d (trace %s)', cap, growth)
        return ClosureReport(
            outcome=ClosureOutcome.CAP_EXCEEDED, dimension=len(span),
            growth_trace=tuple(growth), tolerance=tol, bracket_count=brackets,
        )

    if len(span) > cap:
        return _cap_exceeded()

    done = 0
    while True:
        size = len(span)
        elems = [complexify(v, shape) for v in span.rows]
        for j in range(done, size):
            for i in range(j):
                bracket = elems[i] @ elems[j] - elems[j] @ elems[i]
                brackets += 1
                if span.offer(realify(bracket), threshold) and len(span) > cap:
                    growth.append(len(span))
                    return _cap_exceeded()
        done = size
        logger.debug('closure sweep: %d -> %d', size, len(span))
        if len(span) == size:
            break
        growth.append(len(span))

    elements = [complexify(v, shape) for v in span.rows]
    structure, residual = _bracket_table(elements)
    frozen = []
    for e in elements:
        e.setflags(write=False)
        frozen.append(e)
    basis = LieBasis(elements=tuple(frozen), structure=structure, residual=residual, tolerance=tol)
    logger.info('closure finite: dimension %d after %d brackets', basis.dimension, brackets)
    return ClosureReport(
        outcome=ClosureOutcome.FINITE, dimension=basis.dimension,
        growth_trace=tuple(growth), tolerance=tol, bracket_count=brackets, basis=basis,
    )


def operator_algebra(model, scheme, tol=None, cap=None):
    """Lie{K(G, Theta), e^{i theta_k} L_k} for complete homodyne detection"""
    if not scheme.is_complete(model.n_channels):
        raise IncompleteSchemeError('the operator algebra is defined for complete homodyne detection only')
    generators = [k_strat(model, scheme)] + quadrature_couplings(model, scheme)
    if cap is None:
        cap = 2 * model.dim ** 2
    return closure(generators, tol=tol, cap=cap)


def estimation_algebra(model, scheme, tol=None, cap=None):
    """Lie{L~_{G,Theta}, zeta_{e^{i theta_a} L_a} : a in A} over super-operators"""
    generators = [strat_generator(model, scheme).matrix]
    generators += [zeta(c).matrix for c in quadrature_couplings(model, scheme)]
    if cap is None:
        cap = 2 * model.dim ** 4
    return closure(generators, tol=tol, cap=cap)


def _kernel_dimension(basis, dim, tol):
    """dim of (algebra intersect iR I): 0 or 1"""
    scalar = 1j * np.asarray(identity(dim)) / np.sqrt(dim)
    return 1 if contains(basis, scalar, tol) else 0


def zeta_image_dimension(operators, tol=None):
    """Dimension of Lie{zeta_A1, ...} from a super-operator closure"""
    report = closure([zeta(a).matrix for a in operators], tol=tol)
    return report.dimension


@dataclass(frozen=True)
class TheoremCheck:
    dim_ops: int
    dim_superops: int
    kernel_dim: int
    superops_in_image: bool
    image_in_superops: bool
    passed: bool

    def to_dict(self):
        return {
            'dim_ops': self.dim_ops,
            'dim_superops': self.dim_superops,
            'kernel_dim': self.kernel_dim,
            'superops_in_image': self.superops_in_image,
            'image_in_superops': self.image_in_superops,
            'pass': self.passed,
        }


def compare_algebras(ops, sup, dim, tol=None):
    """
    Check ops -> sup under zeta: dim sup = dim ops - dim(ops meet iR I) and the
    zeta-image of ops spans exactly sup. Both reports must be finite.
    """
    tol = estalg_setting('DEFAULT_TOL') if tol is None else tol
    if not (ops.is_finite and sup.is_finite):
        logger.warning('theorem check incomplete: a closure hit its cap')
        return TheoremCheck(ops.dimension, sup.dimension, 0, False, False, False)

    kernel_dim = _kernel_dimension(ops.basis, dim, tol)
    image = _RealSpan(2 * dim ** 4)
    for x in ops.basis.elements:
        z = realify(zeta(x).matrix)
        norm = float(np.linalg.norm(z))
        if norm > tol:
            image.offer(z / norm, tol)
    sup_rows = sup.basis.vectors()
    sup_in_image = all(_in_span(image.rows, v, tol) for v in sup_rows)
    image_in_sup = all(_in_span(sup_rows, v, tol) for v in image.rows)
    passed = (sup.dimension == ops.dimension - kernel_dim) and sup_in_image and image_in_sup
    return TheoremCheck(
        dim_ops=ops.dimension, dim_superops=sup.dimension, kernel_dim=kernel_dim,
        superops_in_image=sup_in_image, image_in_superops=image_in_sup, passed=passed,
    )


def verify_theorem_main(model, scheme, tol=None, cap=None):
    """Compare the estimation algebra with the zeta-image of the operator algebra"""
    tol = estalg_setting('DEFAULT_TOL') if tol is None else tol
    ops = operator_algebra(model, scheme, tol=tol, cap=cap)
    sup = estimation_algebra(model, scheme, tol=tol)
    return compare_algebras(ops, sup, model.dim, tol)


@dataclass(frozen=True, eq=False)
class WeiNormanPath:
    """Coordinates u(t) of U(t) = e^{u_1 X_1} ... e^{u_n X_n}"""
    basis: LieBasis = field(repr=False)
    times: np.ndarray = field(repr=False)
    coordinates: np.ndarray = field(repr=False)

    def propagator(self, step=-1):
        u = self.coordinates[step]
        dim = self.basis.shape[0]
        prod = np.eye(dim, dtype=np.complex128)
        for ui, xi in zip(u, self.basis.elements):
            prod = prod @ scipy.linalg.expm(ui * xi)
        return prod


def _wei_norman_matrix(basis, u):
    """Column j: coordinates of Ad_{e^{u_1 X_1}} ... Ad_{e^{u_{j-1} X_{j-1}}} X_j"""
    vecs = basis.vectors()
    n = basis.dimension
    dim = basis.shape[0]
    m = np.zeros((n, n))
    g = np.eye(dim, dtype=np.complex128)
    g_inv = np.eye(dim, dtype=np.complex128)
    for j, xj in enumerate(basis.elements):
        m[:, j] = vecs @ realify(g @ xj @ g_inv)
        g = g @ scipy.linalg.expm(u[j] * xj)
        g_inv = scipy.linalg.expm(-u[j] * xj) @ g_inv
    return m


def wei_norman(basis, coeff_path, dt, max_condition=None):
    """
    Integrate M(u) du/dt = g(t) with classical RK4.

    coeff_path has shape (steps, n); row k is the (constant) coefficient vector
    on [k dt, (k+1) dt). Raises ChartBreakdownError when M(u) becomes singular.
    """
    if not basis.is_closed():
        raise NotClosedError('Wei-Norman needs a closed basis', residual=basis.residual)
    max_condition = estalg_setting('CONDITION_LIMIT') if max_condition is None else max_condition
    g_path = np.atleast_2d(np.asarray(coeff_path, dtype=float))
    n = basis.dimension
    if g_path.shape[1] != n:
        raise ClosureInputError(f'coefficient path has {g_path.shape[1]} columns, basis has {n}')

    def rhs(u, g, t):
        m = _wei_norman_matrix(basis, u)
        cond = np.linalg.cond(m)
        if not np.isfinite(cond) or cond > max_condition:
            raise ChartBreakdownError(
                f'Wei-Norman chart singular at t={t:.6g} (cond {cond:.3e})', time=t, condition=cond,
            )
        return np.linalg.solve(m, g)

    steps = g_path.shape[0]
    u = np.zeros((steps + 1, n))
    times = dt * np.arange(steps + 1)
    det_prev = np.linalg.det(_wei_norman_matrix(basis, u[0]))
    for k in range(steps):
        t, g, uk = times[k], g_path[k], u[k]
        k1 = rhs(uk, g, t)
        k2 = rhs(uk + 0.5 * dt * k1, g, t + 0.5 * dt)
        k3 = rhs(uk + 0.5 * dt * k2, g, t + 0.5 * dt)
        k4 = rhs(uk + dt * k3, g, t + dt)
        u[k + 1] = uk + dt * (k1 + 2 * k2 + 2 * k3 + k4) / 6
        det_next = np.linalg.det(_wei_norman_matrix(basis, u[k + 1]))
        if np.sign(det_next) != np.sign(det_prev):
            raise ChartBreakdownError(
                f'Wei-Norman chart crossed a singular point in ({t:.6g}, {t + dt:.6g}]',
                time=t + dt,
            )
        det_prev = det_next
    return WeiNormanPath(basis=basis, times=times, coordinates=u)


def direct_propagator(basis, coeff_path, dt):
    """Time-ordered product of one-step exponentials, the Wei-Norman oracle"""
    g_path = np.atleast_2d(np.asarray(coeff_path, dtype=float))
    dim = basis.shape[0]
    prop = np.eye(dim, dtype=np.complex128)
    for g in g_path:
        gen = sum(gi * xi for gi, xi in zip(g, basis.elements))
        prop = scipy.linalg.expm(dt * gen) @ prop
    return prop
