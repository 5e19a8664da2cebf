"""
Dense complex operators on a finite-dimensional Hilbert space.

Operators are plain read-only ``complex128`` numpy arrays; ``as_operator``
is the single gate that validates shape, finiteness and the dimension cap.
"""

import logging
from typing import NamedTuple

import numpy as np
import scipy.linalg

from .conf import estalg_setting
from .exceptions import DimensionCapError, DimensionMismatchError, NonFiniteOperatorError

logger = logging.getLogger(__name__)


class HermitianCheck(NamedTuple):
    """Outcome of a self-adjointness test"""
    is_selfadjoint: bool
    defect: float


def as_operator(a, name='operator'):
    """Validate and freeze a square complex matrix"""
    arr = np.array(a, dtype=np.complex128)
    if arr.ndim != 2 or arr.shape[0] != arr.shape[1] or arr.shape[0] == 0:
        raise DimensionMismatchError(f'{name} must be a non-empty square matrix, got shape {arr.shape}')
    max_dim = estalg_setting('MAX_DIM')
    if arr.shape[0] > max_dim:
        raise DimensionCapError(f'{name} has dimension {arr.shape[0]} > {max_dim}')
    if not np.all(np.isfinite(arr)):
        raise NonFiniteOperatorError(f'{name} has non-finite entries')
    arr.setflags(write=False)
    return arr


def _frozen(arr):
    arr = np.ascontiguousarray(arr, dtype=np.complex128)
    arr.setflags(write=False)
    return arr


def _check_pair(a, b):
    if a.shape != b.shape:
        raise DimensionMismatchError(f'dimension mismatch: {a.shape} vs {b.shape}')


def identity(dim):
    return _frozen(np.eye(dim))


def zeros(dim):
    return _frozen(np.zeros((dim, dim)))


def destroy(dim):
    """Annihilation operator of an oscillator truncated to ``dim`` levels"""
    return _frozen(np.diag(np.sqrt(np.arange(1, dim)), k=1))


SIGMA_X = _frozen([[0, 1], [1, 0]])
SIGMA_Y = _frozen([[0, -1j], [1j, 0]])
SIGMA_Z = _frozen([[1, 0], [0, -1]])
SIGMA_MINUS = _frozen([[0, 1], [0, 0]])
SIGMA_PLUS = _frozen([[0, 0], [1, 0]])


def dagger(a):
    """Conjugate transpose"""
    return _frozen(np.conj(np.transpose(a)))


def commutator(a, b):
    """[A, B] = AB - BA"""
    a, b = np.asarray(a), np.asarray(b)
    _check_pair(a, b)
    return _frozen(a @ b - b @ a)


def anticommutator(a, b):
    """[A, B]_+ = AB + BA"""
    a, b = np.asarray(a), np.asarray(b)
    _check_pair(a, b)
    return _frozen(a @ b + b @ a)


def hs_inner(a, b):
    """Hilbert-Schmidt pairing tr(A^dagger B)"""
    a, b = np.asarray(a), np.asarray(b)
    _check_pair(a, b)
    return complex(np.vdot(a, b))


def hs_norm(a):
    return float(np.linalg.norm(a))


def expm(a):
    """Matrix exponential (scaling and squaring with Pade approximants)"""
    a = np.asarray(a, dtype=np.complex128)
    if not np.all(np.isfinite(a)):
        raise NonFiniteOperatorError('expm of a non-finite matrix')
    return _frozen(scipy.linalg.expm(a))


def hermitian_check(a, tol=0.0):
    """Operator-norm distance between A and its adjoint"""
    a = np.asarray(a)
    defect = float(np.linalg.norm(a - np.conj(a.T), ord=2)) if a.size else 0.0
    return HermitianCheck(is_selfadjoint=defect <= tol, defect=defect)


def random_operator(rng, dim, scale=1.0):
    """Complex Ginibre matrix with entries of variance scale**2 / dim"""
    z = rng.standard_normal((dim, dim)) + 1j * rng.standard_normal((dim, dim))
    return _frozen(z * (scale / np.sqrt(2 * dim)))


def random_hermitian(rng, dim, scale=1.0):
    z = random_operator(rng, dim, scale)
    return _frozen((z + np.conj(z.T)) / 2)
