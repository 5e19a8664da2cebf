"""
Identity suite over seeded random models.

Each identity is evaluated on every (dimension, seed) pair and reported as the
largest scaled defect found, so one JSON document says which identities hold
and how tightly.
"""

import logging
from dataclasses import dataclass, field
from typing import Dict

import numpy as np

from .lie_engine import verify_theorem_main
from .operators import commutator, dagger, hs_norm, identity, random_hermitian, random_operator
from .superops import (
    KForm, MeasurementScheme, ModelSpec, adjoint, apply, compose, dissipation, k_strat,
    l_unobs, lindblad_forms, sbracket, strat_generator, zeta,
)

logger = logging.getLogger(__name__)

IDENTITY_TOL = 1e-12


def random_model(rng, dim, n_channels=None, scale=1.0):
    """Ginibre couplings and a GUE-like Hamiltonian"""
    if n_channels is None:
        n_channels = int(rng.integers(1, 4))
    couplings = tuple(random_operator(rng, dim, scale) for _ in range(n_channels))
    return ModelSpec(dim=dim, L=couplings, H=random_hermitian(rng, dim, scale))


def random_scheme(rng, n_channels, complete=False):
    """Random observed subset (possibly empty) with uniform phases"""
    if complete:
        observed = list(range(n_channels))
    else:
        size = int(rng.integers(0, n_channels + 1))
        observed = sorted(rng.choice(n_channels, size=size, replace=False).tolist())
    theta = rng.uniform(0.0, 2 * np.pi, size=len(observed))
    return MeasurementScheme(observed=tuple(observed), theta=tuple(theta.tolist()))


def _model_scale(model):
    return 1.0 + hs_norm(model.H) + sum(hs_norm(l_op) ** 2 for l_op in model.L)


def check_homomorphism(rng, dim):
    a, b = random_operator(rng, dim), random_operator(rng, dim)
    lhs = sbracket(zeta(a), zeta(b)) + zeta(commutator(a, b))
    return lhs.norm() / (1.0 + hs_norm(a) * hs_norm(b)) ** 2


def check_dissipation(rng, dim):
    a, x, y = (random_operator(rng, dim) for _ in range(3))
    defect = hs_norm(dissipation(zeta(a), x, y) + x @ (a + dagger(a)) @ y)
    return defect / (1.0 + hs_norm(a) * hs_norm(x) * hs_norm(y))


def check_adjoint(rng, dim):
    a = random_operator(rng, dim)
    return (adjoint(zeta(a)) - zeta(dagger(a))).norm() / (1.0 + hs_norm(a))


def check_composition(rng, dim):
    """zeta_A o zeta_A (X) = 2 A* X A + X A^2 + A*^2 X"""
    a, x = random_operator(rng, dim), random_operator(rng, dim)
    za = zeta(a)
    a_star = dagger(a)
    expected = 2 * a_star @ x @ a + x @ a @ a + a_star @ a_star @ x
    return hs_norm(compose(za, za)(x) - expected) / (1.0 + hs_norm(a) ** 2 * hs_norm(x))


def check_star_map(rng, dim):
    a, x = random_operator(rng, dim), random_operator(rng, dim)
    za = zeta(a)
    return hs_norm(apply(za, dagger(x)) - dagger(apply(za, x))) / (1.0 + hs_norm(a) * hs_norm(x))


def check_kernel(rng, dim):
    """
    zeta vanishes on iR I and nowhere else: with B the part of A orthogonal to
    iR I, ||zeta_A||_F >= sqrt(2d) ||B||_F.
    """
    eye = np.asarray(identity(dim))
    scalar = 1j * float(rng.normal()) * eye
    a = random_operator(rng, dim)
    shift = np.trace(a).imag / dim
    b = a - 1j * shift * eye
    on_kernel = zeta(scalar).norm()
    invariance = (zeta(a) - zeta(b)).norm()
    bound = np.sqrt(2 * dim) * hs_norm(b)
    shortfall = max(0.0, bound - zeta(a).norm())
    return max(on_kernel, invariance, shortfall) / (1.0 + hs_norm(a))


def check_lindblad_forms(rng, dim):
    model = random_model(rng, dim)
    forms = list(lindblad_forms(model).values())
    worst = max((f - g).norm() for i, f in enumerate(forms) for g in forms[i + 1:])
    unitality = hs_norm(forms[0](identity(dim)))
    return max(worst, unitality) / _model_scale(model)


def check_strat_split(rng, dim, k_form=KForm.DERIVED):
    """strat_generator = zeta(K(G, Theta)) + L_unobs"""
    model = random_model(rng, dim)
    scheme = random_scheme(rng, model.n_channels)
    split = zeta(k_strat(model, scheme, k_form)) + l_unobs(model, scheme)
    return (strat_generator(model, scheme) - split).norm() / _model_scale(model)


IDENTITIES = {
    'homomorphism': check_homomorphism,
    'dissipation': check_dissipation,
    'adjoint': check_adjoint,
    'composition': check_composition,
    'star_map': check_star_map,
    'kernel': check_kernel,
    'lindblad_forms': check_lindblad_forms,
    'strat_split': check_strat_split,
}


@dataclass
class IdentityResult:
    name: str
    tolerance: float
    cases: int = 0
    max_defect: float = 0.0
    worst_case: dict = field(default_factory=dict)

    @property
    def passed(self):
        return self.cases > 0 and self.max_defect <= self.tolerance

    def record(self, defect, dim, seed):
        self.cases += 1
        defect = float(defect) if np.isfinite(defect) else float('inf')
        if self.cases == 1 or defect > self.max_defect:
            self.max_defect = defect
            self.worst_case = {'dim': dim, 'seed': seed}

    def to_dict(self):
        return {
            'cases': self.cases,
            'max_defect': self.max_defect,
            'tolerance': self.tolerance,
            'worst_case': self.worst_case,
            'pass': self.passed,
        }


@dataclass
class VerifyReport:
    results: Dict[str, IdentityResult]
    dims: tuple
    seeds: int
    seed: int
    k_form: str

    @property
    def passed(self):
        return all(r.passed for r in self.results.values())

    @property
    def failures(self):
        return [name for name, r in self.results.items() if not r.passed]

    def to_dict(self):
        return {
            'dims': list(self.dims),
            'seeds': self.seeds,
            'seed': self.seed,
            'k_form': self.k_form,
            'identities': {name: r.to_dict() for name, r in self.results.items()},
            'pass': self.passed,
        }


def run_identity_suite(dims=(2, 3, 4), seeds=10, seed=0, k_form=KForm.DERIVED, tol=IDENTITY_TOL,
                       theorem=False, theorem_tol=1e-8):
    """
    Evaluate every identity on seeds x dims random cases.

    Case (d, s) draws from SeedSequence([seed, d, s]) so adding dimensions or
    seeds never changes the cases already in the sweep. ``theorem`` adds the
    operator/estimation algebra comparison on complete-homodyne models.
    """
    k_form = KForm(k_form)
    results = {name: IdentityResult(name, tol) for name in IDENTITIES}
    if theorem:
        results['theorem_main'] = IdentityResult('theorem_main', 0.0)
    for dim in dims:
        for s in range(seeds):
            rng = np.random.default_rng(np.random.SeedSequence([seed, dim, s]))
            for name, check in IDENTITIES.items():
                if name == 'strat_split':
                    defect = check(rng, dim, k_form)
                else:
                    defect = check(rng, dim)
                results[name].record(defect, dim, s)
            if theorem:
                model = random_model(rng, dim, n_channels=int(rng.integers(1, 3)))
                scheme = random_scheme(rng, model.n_channels, complete=True)
                verdict = verify_theorem_main(model, scheme, tol=theorem_tol)
                results['theorem_main'].record(0.0 if verdict.passed else 1.0, dim, s)
        logger.debug('identity suite finished dimension %d', dim)

    report = VerifyReport(results=results, dims=tuple(dims), seeds=seeds, seed=seed, k_form=k_form.value)
    if report.passed:
        logger.info('identity suite passed on %d cases', len(dims) * seeds)
    else:
        logger.warning('identity suite failures: %s', ', '.join(report.failures))
    return report
