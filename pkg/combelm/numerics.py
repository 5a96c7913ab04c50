"""Special functions and dense least-squares solvers.

Bessel functions of the first kind are evaluated with Miller's downward
recurrence, normalized with the identity J_0(x)^2 + 2 sum_k J_k(x)^2 = 1.
Least-squares problems are solved through a column-pivoted QR
factorization of the (optionally regularized) design matrix, never through
an explicit inverse of the normal matrix.
"""
import math
from typing import Tuple

import numpy as np
import scipy.linalg

from .error import ConfigError, DomainError, RankDeficiencyError

RealMatrix = np.ndarray
RealVector = np.ndarray

MAX_ORDER = 200
MAX_ARGUMENT = 50.0

# Extra orders above max(order, |x|) where the downward recurrence starts.
_MILLER_MARGIN = 40
_RESCALE_LIMIT = 1e100
_SERIES_LIMIT = 1e-30


def _check_envelope(order: int, argument: float):
  if abs(order) > MAX_ORDER:
    raise DomainError('Bessel order {} outside [-{}, {}].'.format(order, MAX_ORDER, MAX_ORDER))
  if not math.isfinite(argument) or abs(argument) > MAX_ARGUMENT:
    raise DomainError('Bessel argument {} outside [-{}, {}].'.format(
        argument, MAX_ARGUMENT, MAX_ARGUMENT))


def _start_order(max_order: int, x: float) -> int:
  return max(max_order, int(math.ceil(x))) + _MILLER_MARGIN + int(math.ceil(6.0 * math.sqrt(x)))


def _tiny_argument_sequence(max_order: int, x: float) -> RealVector:
  half = x / 2.0
  values = np.zeros(max_order + 1)
  term = 1.0
  for k in range(max_order + 1):
    if k > 0:
      term *= half / k
    if term == 0.0:
      break
    values[k] = term * (1.0 - half * half / (k + 1))
  return values


def bessel_j_sequence(max_order: int, argument: float) -> RealVector:
  """Returns J_0(x), ..., J_max_order(x) from a single Miller pass."""
  if max_order < 0:
    raise DomainError('Maximal Bessel order must be non-negative, got {}.'.format(max_order))
  _check_envelope(max_order, argument)
  x = abs(float(argument))
  if x == 0.0:
    values = np.zeros(max_order + 1)
    values[0] = 1.0
    return values
  if x < _SERIES_LIMIT:
    values = _tiny_argument_sequence(max_order, x)
  else:
    start = _start_order(max_order, x)
    j = np.zeros(start + 2)
    j[start] = 1.0
    for k in range(start, 0, -1):
      j[k - 1] = (2.0 * k / x) * j[k] - j[k + 1]
      if abs(j[k - 1]) > _RESCALE_LIMIT:
        j[k - 1:] /= _RESCALE_LIMIT
    norm = math.sqrt(j[0] * j[0] + 2.0 * math.fsum(j[1:] * j[1:]))
    values = j[:max_order + 1] / norm
  if argument < 0:
    values = values * np.where(np.arange(max_order + 1) % 2 == 0, 1.0, -1.0)
  return values


def bessel_j(order: int, argument: float) -> float:
  """Bessel function of the first kind J_order(argument) for integer order."""
  _check_envelope(order, argument)
  n = abs(int(order))
  value = bessel_j_sequence(n, argument)[n]
  if order < 0 and n % 2 == 1:
    value = -value
  return float(value)


def bessel_kernel(argument: float, tol: float) -> Tuple[int, RealVector]:
  """Returns (K, J_0..J_K) where |J_k(argument)| < tol for every k > K."""
  if not tol > 0:
    raise ConfigError('Truncation tolerance must be positive, got {}.'.format(tol))
  x = abs(float(argument))
  values = bessel_j_sequence(min(MAX_ORDER, int(math.ceil(x)) + 2 * _MILLER_MARGIN), argument)
  significant = np.nonzero(np.abs(values) >= tol)[0]
  max_order = int(significant[-1]) if significant.size else 0
  return max_order, values[:max_order + 1]


def as_real_matrix(values, name: str = 'matrix') -> RealMatrix:
  matrix = np.asarray(values, dtype=float)
  if matrix.ndim == 1:
    matrix = matrix[:, np.newaxis]
  if matrix.ndim != 2:
    raise ConfigError('{} must be two-dimensional, got shape {}.'.format(name, matrix.shape))
  if not np.all(np.isfinite(matrix)):
    raise ConfigError('{} contains non-finite entries.'.format(name))
  return matrix


def ridge_solve(h: RealMatrix, y: RealMatrix, lam: float) -> RealMatrix:
  """Minimizes |HW - Y|^2 + lam^2 |W|^2.

  Closed form W = (H^T H + lam^2 I)^-1 H^T Y, evaluated as the least-squares
  solution of the stacked system [H; lam I] W = [Y; 0]. A one-dimensional Y
  yields a one-dimensional W.
  """
  h = as_real_matrix(h, 'H')
  vector_target = np.ndim(y) == 1
  y = as_real_matrix(y, 'Y')
  if h.shape[0] != y.shape[0]:
    raise ConfigError('H has {} rows but Y has {}.'.format(h.shape[0], y.shape[0]))
  if not math.isfinite(lam) or lam < 0:
    raise ConfigError('Regularization must be finite and non-negative, got {}.'.format(lam))
  columns = h.shape[1]
  if lam > 0:
    a = np.vstack([h, lam * np.eye(columns)])
    b = np.vstack([y, np.zeros((columns, y.shape[1]))])
  else:
    a, b = h, y
  if a.shape[0] < columns:
    raise RankDeficiencyError(a.shape[0], columns)
  q, r, pivots = scipy.linalg.qr(a, mode='economic', pivoting=True)
  diagonal = np.abs(np.diag(r))
  if lam == 0:
    tol = max(a.shape) * np.finfo(float).eps * (diagonal[0] if diagonal.size else 0.0)
    rank = int(np.count_nonzero(diagonal > tol))
    if rank < columns:
      raise RankDeficiencyError(rank, columns, int(pivots[rank]))
  permuted = scipy.linalg.solve_triangular(r, q.T @ b)
  w = np.empty_like(permuted)
  w[pivots] = permuted
  return w[:, 0] if vector_target else w


def ols_solve(h: RealMatrix, y: RealMatrix) -> RealMatrix:
  """Ordinary least squares, W = pinv(H) Y, for full column rank H."""
  return ridge_solve(h, y, 0.0)
