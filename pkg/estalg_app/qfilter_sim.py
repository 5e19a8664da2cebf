"""
Belavkin-Zakai filtering of homodyne measurement records.

Records are synthesized from the normalized stochastic master equation
(innovations representation); the unnormalized filter is then integrated in
the Ito form (Euler-Maruyama) or the Stratonovich form (stochastic Heun), in
the density picture (rho) or, for pure initial states, the vector picture
(chi). States are column-stacked vectors internally, see ``superops.vec``.
"""

import enum
import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
import pandas as pd
import scipy.linalg

from .conf import estalg_setting
from .exceptions import (
    DimensionMismatchError, FilterDegeneracyError, IncompleteSchemeError, InvalidStateError,
    NumericalBlowupError, SchemeError,
)
from .operators import as_operator, hermitian_check
from .superops import (
    adjoint, k_ito, k_strat, l_unobs, lindblad, quadrature_couplings, unvec, vec, zeta,
)

logger = logging.getLogger(__name__)


class Picture(enum.Enum):
    DENSITY = 'density'
    PURE = 'pure'


class Form(enum.Enum):
    ITO = 'ito'
    STRAT = 'strat'


def _freeze(arr, dtype=float):
    arr = np.array(arr, dtype=dtype)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class TrajectoryRecord:
    """
    Homodyne increments on a uniform grid.

    Row k of ``dY`` and ``dW`` is the increment over [t_k, t_k + dt); ``t_grid``
    holds the step start times, so every channel sequence has the grid length.
    """
    t_grid: np.ndarray = field(repr=False)
    dY: np.ndarray = field(repr=False)
    dW: np.ndarray = field(repr=False)
    dt: float
    seed: Optional[int] = None
    stream: Optional[int] = None

    def __post_init__(self):
        t_grid = _freeze(self.t_grid).reshape(-1)
        steps = t_grid.shape[0]
        increments = []
        for name in ('dY', 'dW'):
            arr = np.array(getattr(self, name), dtype=float)
            if arr.ndim == 1:
                arr = arr.reshape(-1, 1)
            if arr.ndim != 2 or arr.shape[0] != steps:
                raise DimensionMismatchError(f'{name} has shape {arr.shape}, grid has {steps} steps')
            arr.setflags(write=False)
            increments.append(arr)
        if increments[0].shape != increments[1].shape:
            raise DimensionMismatchError('dY and dW have different shapes')
        if self.dt <= 0:
            raise ValueError('dt must be positive')
        object.__setattr__(self, 't_grid', t_grid)
        object.__setattr__(self, 'dY', increments[0])
        object.__setattr__(self, 'dW', increments[1])
        object.__setattr__(self, 'dt', float(self.dt))

    @property
    def steps(self):
        return self.t_grid.shape[0]

    @property
    def n_channels(self):
        return self.dY.shape[1]

    @property
    def horizon(self):
        return self.steps * self.dt


@dataclass(frozen=True, eq=False)
class FilterState:
    """Unnormalized filter: rho-check (density picture) or chi (pure picture)"""
    picture: Picture
    data: np.ndarray = field(repr=False)
    step: int = 0

    @classmethod
    def from_density(cls, rho, step=0):
        rho = np.array(rho, dtype=np.complex128)
        rho = (rho + rho.conj().T) / 2
        rho.setflags(write=False)
        return cls(Picture.DENSITY, rho, step)

    @classmethod
    def from_vector(cls, chi, step=0):
        return cls(Picture.PURE, _freeze(np.reshape(chi, -1), np.complex128), step)

    @property
    def dim(self):
        return self.data.shape[0]

    def operator(self):
        """The unnormalized density operator of either picture, Hermitian"""
        if self.picture is Picture.DENSITY:
            return self.data
        rho = np.outer(self.data, self.data.conj())
        return (rho + rho.conj().T) / 2


def check_density(rho, dim=None, tol=1e-10):
    """Validate a density matrix: Hermitian, unit trace, positive"""
    rho = as_operator(rho, 'rho0')
    if dim is not None and rho.shape[0] != dim:
        raise DimensionMismatchError(f'rho0 has dimension {rho.shape[0]}, model dim is {dim}')
    if not hermitian_check(rho, tol).is_selfadjoint:
        raise InvalidStateError('rho0 is not self-adjoint')
    trace = np.trace(rho).real
    if abs(trace - 1.0) > tol:
        raise InvalidStateError(f'rho0 has trace {trace:.12g}, expected 1')
    lowest = float(np.linalg.eigvalsh(rho)[0])
    if lowest < -tol:
        raise InvalidStateError(f'rho0 is not positive (eigenvalue {lowest:.3e})')
    return rho


def pure_vector(state, dim=None, tol=1e-8):
    """Unit vector of a pure initial state given as a vector or a rank-one density"""
    arr = np.asarray(state, dtype=np.complex128)
    if arr.ndim == 1:
        if dim is not None and arr.shape[0] != dim:
            raise DimensionMismatchError(f'psi0 has dimension {arr.shape[0]}, model dim is {dim}')
        norm = np.linalg.norm(arr)
        if norm == 0 or not np.isfinite(norm):
            raise InvalidStateError('psi0 has no usable norm')
        return arr / norm
    rho = check_density(arr, dim)
    w, v = np.linalg.eigh(rho)
    if w[-1] < 1.0 - tol:
        raise InvalidStateError(f'the pure picture needs a pure initial state (purity {w[-1]:.6g})')
    return v[:, -1]


def default_observables(dim):
    """Projectors on the computational basis, named P0..P{d-1}"""
    observables = {}
    for i in range(dim):
        p = np.zeros((dim, dim), dtype=np.complex128)
        p[i, i] = 1.0
        observables[f'P{i}'] = p
    return observables


def _vec_trace(v, dim):
    # diagonal entries of a column-stacked d x d matrix sit every d + 1 slots
    return v[::dim + 1].sum()


def _step_count(horizon, dt):
    if dt <= 0:
        raise ValueError('dt must be positive')
    if horizon < 0:
        raise ValueError('horizon must be non-negative')
    steps = int(round(horizon / dt))
    if abs(steps * dt - horizon) > 1e-9 * max(horizon, dt):
        logger.warning('horizon %g is not a multiple of dt %g; using %d steps', horizon, dt, steps)
    return steps


def repair_positivity(rho, tol=None):
    """Clip eigenvalues below -tol * trace and rescale to the original trace"""
    tol = estalg_setting('POSITIVITY_TOL') if tol is None else tol
    rho = np.asarray(rho, dtype=np.complex128)
    w, v = np.linalg.eigh(rho)
    trace = float(np.sum(w))
    if w[0] >= -tol * abs(trace):
        return rho, False
    clipped = np.clip(w, 0.0, None)
    total = float(np.sum(clipped))
    if total <= 0.0:
        raise FilterDegeneracyError('positivity repair left a zero state')
    clipped *= trace / total
    return (v * clipped) @ v.conj().T, True


def generate_record(model, scheme, rho0, horizon, dt, seed=None, stream=None, repair=False):
    """
    Simulate a homodyne record from the normalized stochastic master equation.

    dY_a = dW_a + tr(rho (A_a + A_a^dagger)) dt with A_a = e^{i theta_a} L_a and
    dW_a independent N(0, dt). The Wiener increments are drawn up front from
    ``SeedSequence(seed)`` or ``SeedSequence([seed, stream])``.
    """
    scheme.validate(model)
    if dt <= 0:
        raise ValueError('dt must be positive')
    if horizon < dt:
        raise ValueError(f'horizon {horizon} is shorter than one step {dt}')
    rho = check_density(rho0, model.dim)
    seed = estalg_setting('DEFAULT_SEED') if seed is None else int(seed)
    steps = _step_count(horizon, dt)
    entropy = seed if stream is None else [seed, int(stream)]
    rng = np.random.default_rng(np.random.SeedSequence(entropy))

    couplings = quadrature_couplings(model, scheme)
    d_w = rng.standard_normal((steps, len(couplings))) * np.sqrt(dt)
    d_y = np.empty_like(d_w)
    dim = model.dim
    generator = adjoint(lindblad(model)).matrix
    measured = [adjoint(zeta(c)).matrix for c in couplings]

    v = vec(rho).astype(np.complex128)
    repairs = 0
    for k in range(steps):
        drive = np.zeros_like(v)
        for alpha, b in enumerate(measured):
            bv = b @ v
            signal = _vec_trace(bv, dim).real
            d_y[k, alpha] = d_w[k, alpha] + signal * dt
            drive += (bv - signal * v) * d_w[k, alpha]
        v = v + (generator @ v) * dt + drive
        if not np.all(np.isfinite(v)):
            raise NumericalBlowupError(f'record generation blew up at step {k + 1}', step=k + 1)
        rho = unvec(v, dim)
        rho = (rho + rho.conj().T) / 2
        trace = np.trace(rho).real
        if trace <= 0:
            raise FilterDegeneracyError(f'record state lost its trace at step {k + 1}', step=k + 1)
        rho = rho / trace
        if repair:
            rho, fixed = repair_positivity(rho)
            repairs += fixed
        v = vec(rho)

    if repairs:
        logger.info('record generation repaired positivity %d times', repairs)
    logger.debug('generated %d steps on %d channels (seed %s, stream %s)',
                 steps, len(couplings), seed, stream)
    return TrajectoryRecord(
        t_grid=dt * np.arange(steps), dY=d_y, dW=d_w, dt=dt, seed=seed, stream=stream,
    )


def coarsen_record(record, factor):
    """Same noise path on a dt * factor grid (sums of consecutive increments)"""
    factor = int(factor)
    if factor < 1:
        raise ValueError('factor must be a positive integer')
    steps = record.steps // factor
    width = record.n_channels
    d_y = record.dY[:steps * factor].reshape(steps, factor, width).sum(axis=1)
    d_w = record.dW[:steps * factor].reshape(steps, factor, width).sum(axis=1)
    return TrajectoryRecord(
        t_grid=record.t_grid[:steps * factor:factor], dY=d_y, dW=d_w,
        dt=record.dt * factor, seed=record.seed, stream=record.stream,
    )


def record_to_frame(record):
    frame = pd.DataFrame({'t': record.t_grid})
    for alpha in range(record.n_channels):
        frame[f'dY_{alpha + 1}'] = record.dY[:, alpha]
    for alpha in range(record.n_channels):
        frame[f'dW_{alpha + 1}'] = record.dW[:, alpha]
    return frame


def record_from_frame(frame, dt, seed=None, stream=None):
    y_cols = sorted((c for c in frame.columns if c.startswith('dY_')), key=lambda c: int(c[3:]))
    w_cols = sorted((c for c in frame.columns if c.startswith('dW_')), key=lambda c: int(c[3:]))
    if len(y_cols) != len(w_cols):
        raise ValueError('record table needs matching dY_k and dW_k columns')
    return TrajectoryRecord(
        t_grid=frame['t'].to_numpy(dtype=float),
        dY=frame[y_cols].to_numpy(dtype=float),
        dW=frame[w_cols].to_numpy(dtype=float),
        dt=dt, seed=seed, stream=stream,
    )


class BelavkinZakaiFilter:
    """
    Step operators of the unnormalized filter for one model and scheme.

    The Stratonovich drift is assembled from its split form,
    adjoint(zeta(K(G, Theta))) + adjoint(L_unobs); under complete homodyne
    detection the unobserved part is identically zero.
    """

    def __init__(self, model, scheme):
        scheme.validate(model)
        self.model = model
        self.scheme = scheme
        self.dim = model.dim
        self.couplings = [np.asarray(c) for c in quadrature_couplings(model, scheme)]
        self.lindblad_star = adjoint(lindblad(model)).matrix
        self.unobserved_star = adjoint(l_unobs(model, scheme)).matrix
        self.strat_star = adjoint(zeta(k_strat(model, scheme))).matrix + self.unobserved_star
        self.coupling_star = [adjoint(zeta(c)).matrix for c in self.couplings]
        self.k_ito = np.asarray(k_ito(model))
        self.complete = scheme.is_complete(model.n_channels)
        self.k_strat = np.asarray(k_strat(model, scheme)) if self.complete else None

    def _increment(self, d_y):
        d_y = np.asarray(d_y, dtype=float).reshape(-1)
        if d_y.shape[0] != len(self.couplings):
            raise DimensionMismatchError(
                f'increment has {d_y.shape[0]} channels, scheme observes {len(self.couplings)}'
            )
        return d_y

    def _expect(self, state, picture):
        if state.picture is not picture:
            raise ValueError(f'expected a {picture.value}-picture state, got {state.picture.value}')
        if state.dim != self.dim:
            raise DimensionMismatchError(f'state has dimension {state.dim}, model dim is {self.dim}')

    def _density_result(self, v, step):
        if not np.all(np.isfinite(v)):
            raise NumericalBlowupError(f'filter blew up at step {step}', step=step)
        return FilterState.from_density(unvec(v, self.dim), step)

    def _vector_result(self, chi, step):
        if not np.all(np.isfinite(chi)):
            raise NumericalBlowupError(f'filter blew up at step {step}', step=step)
        return FilterState.from_vector(chi, step)

    def step_ito(self, state, d_y, dt):
        """rho <- rho + L*(rho) dt + sum_a (A_a rho + rho A_a^dagger) dY_a"""
        self._expect(state, Picture.DENSITY)
        d_y = self._increment(d_y)
        gen = self.lindblad_star * dt
        for b, y in zip(self.coupling_star, d_y):
            gen = gen + y * b
        v = vec(state.data)
        return self._density_result(v + gen @ v, state.step + 1)

    def step_strat(self, state, d_y, dt):
        """Stochastic Heun step; for a linear SDE it is v + Gv + G(Gv)/2"""
        self._expect(state, Picture.DENSITY)
        d_y = self._increment(d_y)
        gen = self.strat_star * dt
        for b, y in zip(self.coupling_star, d_y):
            gen = gen + y * b
        v = vec(state.data)
        gv = gen @ v
        return self._density_result(v + gv + 0.5 * (gen @ gv), state.step + 1)

    def pure_step(self, state, d_y, dt, form=Form.ITO):
        self._expect(state, Picture.PURE)
        form = Form(form)
        d_y = self._increment(d_y)
        if form is Form.ITO:
            gen = self.k_ito * dt
        else:
            if not self.complete:
                raise IncompleteSchemeError('the Stratonovich vector filter needs complete homodyne detection')
            gen = self.k_strat * dt
        for a, y in zip(self.couplings, d_y):
            gen = gen + y * a
        chi = state.data
        g_chi = gen @ chi
        if form is Form.STRAT:
            return self._vector_result(chi + g_chi + 0.5 * (gen @ g_chi), state.step + 1)
        return self._vector_result(chi + g_chi, state.step + 1)

    def step(self, state, d_y, dt, form=Form.ITO):
        form = Form(form)
        if state.picture is Picture.PURE:
            return self.pure_step(state, d_y, dt, form)
        if form is Form.ITO:
            return self.step_ito(state, d_y, dt)
        return self.step_strat(state, d_y, dt)


def zakai_step_ito(state, model, scheme, d_y, dt):
    return BelavkinZakaiFilter(model, scheme).step_ito(state, d_y, dt)


def zakai_step_strat(state, model, scheme, d_y, dt):
    return BelavkinZakaiFilter(model, scheme).step_strat(state, d_y, dt)


def pure_step(state, model, scheme, d_y, dt, form=Form.ITO):
    return BelavkinZakaiFilter(model, scheme).pure_step(state, d_y, dt, form)


@dataclass(frozen=True, eq=False)
class Normalized:
    """pi_t(X) = sigma_t(X) / sigma_t(I)"""
    norm: float
    unnormalized: np.ndarray = field(repr=False)

    def sigma(self, x):
        # tr(rho X) as an elementwise sum, which keeps tr(rho I) exactly real
        return complex(np.sum(self.unnormalized.T * np.asarray(x)))

    def pi(self, x):
        return self.sigma(x) / self.norm

    @property
    def density(self):
        return self.unnormalized / self.norm


def normalize(state, floor=None):
    floor = estalg_setting('DEGENERACY_FLOOR') if floor is None else floor
    op = state.operator()
    norm = complex(np.sum(op.T * np.eye(state.dim))).real
    if not np.isfinite(norm) or norm < floor:
        raise FilterDegeneracyError(
            f'filter norm {norm:.3e} fell below {floor:.1e} at step {state.step}', step=state.step,
        )
    return Normalized(norm=norm, unnormalized=op)


def initial_state(rho0, picture, dim):
    picture = Picture(picture)
    if picture is Picture.PURE:
        return FilterState.from_vector(pure_vector(rho0, dim))
    return FilterState.from_density(check_density(rho0, dim))


def _filter_row(t, state, observables, repairs):
    normalized = normalize(state)
    row = {'t': t, 'sigma_I': normalized.norm}
    for name, x in observables.items():
        value = normalized.pi(x)
        row[f're_pi_{name}'] = value.real
        row[f'im_pi_{name}'] = value.imag
    row['min_eig'] = float(np.linalg.eigvalsh(normalized.density)[0])
    row['repairs'] = repairs
    return row


def run_filter(record, model, scheme, rho0, picture=Picture.DENSITY, form=Form.ITO,
               observables=None, repair=True):
    """
    Integrate the filter along a whole record.

    Returns a table with one row per grid point (steps + 1 rows): t, sigma_I,
    re/im of pi_t(X) for every observable, the lowest eigenvalue of the
    normalized state and the running count of positivity repairs. Density
    states are clipped back into the positive cone after every step unless
    ``repair`` is off.
    """
    picture, form = Picture(picture), Form(form)
    if record.n_channels != scheme.n_observed:
        raise SchemeError(
            f'record has {record.n_channels} channels, scheme observes {scheme.n_observed}'
        )
    filt = BelavkinZakaiFilter(model, scheme)
    if picture is Picture.PURE and form is Form.STRAT and not filt.complete:
        raise IncompleteSchemeError('the Stratonovich vector filter needs complete homodyne detection')
    observables = default_observables(model.dim) if observables is None else {
        name: as_operator(x, name) for name, x in observables.items()
    }
    for name, x in observables.items():
        if x.shape[0] != model.dim:
            raise DimensionMismatchError(f'observable {name} has dimension {x.shape[0]}')

    tol = estalg_setting('POSITIVITY_TOL')
    state = initial_state(rho0, picture, model.dim)
    repairs = 0
    violations = 0
    rows = [_filter_row(0.0, state, observables, repairs)]
    for k in range(record.steps):
        state = filt.step(state, record.dY[k], record.dt, form)
        if repair and picture is Picture.DENSITY:
            # a degenerate state is reported, not repaired
            normalize(state)
            rho, fixed = repair_positivity(state.data, tol)
            if fixed:
                repairs += 1
                state = FilterState.from_density(rho, state.step)
        row = _filter_row((k + 1) * record.dt, state, observables, repairs)
        if row['min_eig'] < -tol:
            violations += 1
        rows.append(row)

    if violations:
        logger.warning('%d of %d filter states left the positive cone (lowest eigenvalue below -%g)',
                       violations, record.steps, tol)
    logger.info('filtered %d steps (%s, %s), %d positivity repairs',
                record.steps, picture.value, form.value, repairs)
    return pd.DataFrame(rows)


def compare_forms(record, model, scheme, rho0, picture=Picture.DENSITY, observables=None, repair=True):
    """Ito and Stratonovich runs on one record side by side, with |pi_ito - pi_strat|"""
    ito = run_filter(record, model, scheme, rho0, picture, Form.ITO, observables, repair)
    strat = run_filter(record, model, scheme, rho0, picture, Form.STRAT, observables, repair)
    frame = ito.merge(strat, on='t', suffixes=('_ito', '_strat'))
    names = [c[len('re_pi_'):] for c in ito.columns if c.startswith('re_pi_')]
    for name in names:
        diff = ((frame[f're_pi_{name}_ito'] - frame[f're_pi_{name}_strat']) ** 2
                + (frame[f'im_pi_{name}_ito'] - frame[f'im_pi_{name}_strat']) ** 2)
        frame[f'absdiff_pi_{name}'] = np.sqrt(diff)
    return frame


def run_ensemble(model, scheme, rho0, horizon, dt, n_trajectories, seed=None, observables=None,
                 picture=Picture.DENSITY, form=Form.ITO, threads=None, repair=True):
    """
    Mean and standard error of Re pi_t(X) over independent trajectories.

    Trajectory i draws its noise from SeedSequence([seed, i]); results are
    merged in index order and reduced with math.fsum, so the thread count
    never changes the table.
    """
    if n_trajectories < 1:
        raise ValueError('n_trajectories must be at least 1')
    seed = estalg_setting('DEFAULT_SEED') if seed is None else int(seed)
    threads = estalg_setting('THREADS') if threads is None else threads
    threads = max(1, int(threads))
    observables = default_observables(model.dim) if observables is None else observables
    names = list(observables)
    columns = [f're_pi_{name}' for name in names]

    def _trajectory(index):
        record = generate_record(model, scheme, rho0, horizon, dt, seed=seed, stream=index, repair=repair)
        table = run_filter(record, model, scheme, rho0, picture, form, observables, repair)
        return table['t'].to_numpy(), table[columns].to_numpy()

    with ThreadPoolExecutor(max_workers=threads) as executor:
        results = list(executor.map(_trajectory, range(n_trajectories)))

    times = results[0][0]
    values = np.stack([r[1] for r in results])
    n = n_trajectories
    frame = pd.DataFrame({'t': times})
    for o, name in enumerate(names):
        means, errors = [], []
        for j in range(len(times)):
            sample = values[:, j, o]
            mean = math.fsum(sample) / n
            if n > 1:
                var = math.fsum((sample - mean) ** 2) / (n - 1)
                errors.append(math.sqrt(var / n))
            else:
                errors.append(float('nan'))
            means.append(mean)
        frame[f'mean_{name}'] = means
        frame[f'stderr_{name}'] = errors
    frame['n_trajectories'] = n
    logger.info('ensemble of %d trajectories on %d threads', n, threads)
    return frame


def lindblad_expectation(model, rho0, x, times):
    """tr(e^{t L*} rho0 X) for each t, the unconditional evolution"""
    dim = model.dim
    generator = adjoint(lindblad(model)).matrix
    v0 = vec(check_density(rho0, dim))
    x = as_operator(x, 'X')
    values = []
    for t in np.atleast_1d(times):
        rho_t = unvec(scipy.linalg.expm(float(t) * generator) @ v0, dim)
        values.append(complex(np.sum(rho_t.T * x)))
    return np.array(values)
