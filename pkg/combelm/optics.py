"""Spectral-domain model of the optical chain.

Fields are combs of equally spaced lines at w + k*Omega, stored as complex
amplitudes for consecutive k. A phase modulator with index m acts on the
line amplitudes as a convolution with the Jacobi-Anger coefficients
i^j J_j(m); programmable spectral filters scale line powers; photodiodes
integrate power over all lines.
"""
from dataclasses import dataclass, field
from dataclasses_json import dataclass_json
import enum
import math
from typing import Optional, Sequence, Tuple, Union

import numpy as np

from . import numerics
from .error import ConfigError, UnsupportedConfigurationError

MAX_MODULATION_INDEX = 12.0
MAX_TRUNCATION_TOL = 1e-6
MIN_ATTENUATION_DB = -30.0

_I_POWERS = np.array([1.0, 1.0j, -1.0, -1.0j])


class LineState(enum.Enum):
  BLOCK = 'block'


BLOCK = LineState.BLOCK

Attenuation = Union[float, LineState]


@dataclass_json
@dataclass(frozen=True)
class ModulatorConfig:
  m: float = 0.0
  epsilon: float = 0.0  # Second harmonic strength.
  phi: float = 0.0  # Second harmonic phase, radians.
  truncation_tol: float = 1e-12

  def __post_init__(self):
    if not 0.0 <= self.m <= MAX_MODULATION_INDEX:
      raise ConfigError('Modulation index {} outside [0, {}].'.format(
          self.m, MAX_MODULATION_INDEX))
    if not (math.isfinite(self.epsilon) and self.epsilon >= 0):
      raise ConfigError('Second harmonic strength must be non-negative, got {}.'.format(
          self.epsilon))
    if not math.isfinite(self.phi):
      raise ConfigError('Second harmonic phase must be finite, got {}.'.format(self.phi))
    if not 0.0 < self.truncation_tol <= MAX_TRUNCATION_TOL:
      raise ConfigError('Truncation tolerance {} outside (0, {}].'.format(
          self.truncation_tol, MAX_TRUNCATION_TOL))


def _frozen(values: np.ndarray) -> np.ndarray:
  values = np.array(values, dtype=complex)
  values.setflags(write=False)
  return values


@dataclass(frozen=True, eq=False)
class CombState:
  center_offset: int  # k of amplitudes[0]
  amplitudes: np.ndarray
  base_frequency: float = 0.0  # Hz, informational.
  line_spacing: float = 0.0  # Hz, informational.

  def __post_init__(self):
    amplitudes = _frozen(np.atleast_1d(self.amplitudes))
    if amplitudes.ndim != 1 or amplitudes.size == 0:
      raise ConfigError('A comb needs a non-empty one-dimensional amplitude sequence.')
    if not np.all(np.isfinite(amplitudes)):
      raise ConfigError('Comb amplitudes must be finite.')
    object.__setattr__(self, 'center_offset', int(self.center_offset))
    object.__setattr__(self, 'amplitudes', amplitudes)

  @property
  def k_min(self) -> int:
    return self.center_offset

  @property
  def k_max(self) -> int:
    return self.center_offset + self.amplitudes.size - 1

  @property
  def indices(self) -> np.ndarray:
    return np.arange(self.k_min, self.k_max + 1)

  @property
  def powers(self) -> np.ndarray:
    return np.abs(self.amplitudes)**2

  @property
  def total_power(self) -> float:
    return float(math.fsum(self.powers))

  def amplitude(self, k: int) -> complex:
    if self.k_min <= k <= self.k_max:
      return complex(self.amplitudes[k - self.center_offset])
    return 0j

  def window_powers(self, k_lo: int, k_hi: int) -> np.ndarray:
    """Powers of lines k_lo..k_hi, zero for unpopulated lines."""
    return window_slice(self.powers, self.center_offset, k_lo, k_hi)

  def with_amplitudes(self, center_offset: int, amplitudes: np.ndarray) -> 'CombState':
    return CombState(center_offset, amplitudes, self.base_frequency, self.line_spacing)


def window_slice(values: np.ndarray, center_offset: int, k_lo: int, k_hi: int) -> np.ndarray:
  """Slices the last axis of values (first stored k = center_offset) to k_lo..k_hi."""
  shape = values.shape[:-1] + (k_hi - k_lo + 1,)
  out = np.zeros(shape, dtype=values.dtype)
  lo = max(k_lo, center_offset)
  hi = min(k_hi, center_offset + values.shape[-1] - 1)
  if lo <= hi:
    out[..., lo - k_lo:hi - k_lo + 1] = values[..., lo - center_offset:hi - center_offset + 1]
  return out


def _check_attenuation(value: Attenuation, bounded: bool):
  if value is BLOCK:
    return
  if not math.isfinite(value) or value > 0.0:
    raise ConfigError('Attenuation {} dB must be finite and at most 0 dB.'.format(value))
  if bounded and value < MIN_ATTENUATION_DB:
    raise ConfigError('Attenuation {} dB below {} dB.'.format(value, MIN_ATTENUATION_DB))


def _power_factor(value: Attenuation) -> float:
  if value is BLOCK:
    return 0.0
  return 10.0**(value / 10.0)


@dataclass(frozen=True)
class FilterShape:
  """Per-line power attenuation of a programmable spectral filter.

  Lines outside the stored range get `outside`, 0 dB unless stated.
  Unbounded filters accept attenuations below -30 dB; they only serve the
  proportional (power-linear) readout mode.
  """
  center_offset: int = 0
  attenuations: Tuple[Attenuation, ...] = ()
  outside: Attenuation = 0.0
  bounded: bool = True
  _factors: np.ndarray = field(default=None, init=False, repr=False, compare=False)

  def __post_init__(self):
    attenuations = tuple(a if a is BLOCK else float(a) for a in self.attenuations)
    for value in attenuations + (self.outside,):
      _check_attenuation(value, self.bounded)
    factors = np.array([_power_factor(a) for a in attenuations], dtype=float)
    factors.setflags(write=False)
    object.__setattr__(self, 'center_offset', int(self.center_offset))
    object.__setattr__(self, 'attenuations', attenuations)
    object.__setattr__(self, '_factors', factors)

  @classmethod
  def pass_through(cls) -> 'FilterShape':
    return cls()

  @classmethod
  def blocked(cls) -> 'FilterShape':
    return cls(outside=BLOCK)

  @classmethod
  def from_power_factors(cls, center_offset: int, factors: Sequence[float],
                         outside: Attenuation = BLOCK) -> 'FilterShape':
    """Builds an unbounded filter with the given linear power transmissions."""
    attenuations = []
    for factor in factors:
      if not 0.0 <= factor <= 1.0:
        raise ConfigError('Power transmission {} outside [0, 1].'.format(factor))
      attenuations.append(BLOCK if factor == 0.0 else 10.0 * math.log10(factor))
    return cls(center_offset, tuple(attenuations), outside, bounded=False)

  def power_factor(self, k: int) -> float:
    index = k - self.center_offset
    if 0 <= index < len(self.attenuations):
      return float(self._factors[index])
    return _power_factor(self.outside)

  def power_factors(self, k_lo: int, k_hi: int) -> np.ndarray:
    factors = np.full(k_hi - k_lo + 1, _power_factor(self.outside))
    lo = max(k_lo, self.center_offset)
    hi = min(k_hi, self.center_offset + len(self.attenuations) - 1)
    if lo <= hi:
      factors[lo - k_lo:hi - k_lo + 1] = self._factors[lo - self.center_offset:hi -
                                                       self.center_offset + 1]
    return factors


@dataclass(frozen=True)
class PhotodiodeReading:
  intensity: float
  dark_noise_sigma: float = 0.0


def jacobi_anger_kernel(m: float, tol: float) -> Tuple[int, np.ndarray]:
  """Returns (K, c) with c[j + K] = i^j J_j(m) for j = -K..K."""
  max_order, values = numerics.bessel_kernel(m, tol)
  orders = np.arange(-max_order, max_order + 1)
  signs = np.where((orders < 0) & (orders % 2 == 1), -1.0, 1.0)
  return max_order, _I_POWERS[orders % 4] * signs * values[np.abs(orders)]


def _trim(center_offset: int, amplitudes: np.ndarray, threshold: float) -> Tuple[int, np.ndarray]:
  significant = np.nonzero(np.abs(amplitudes) > threshold)[0]
  if significant.size == 0:
    centre = -center_offset if 0 <= -center_offset < amplitudes.size else 0
    return center_offset + centre, amplitudes[centre:centre + 1]
  first, last = int(significant[0]), int(significant[-1])
  return center_offset + first, amplitudes[first:last + 1]


def generate_comb(e0: float,
                  config: ModulatorConfig,
                  base_frequency: float = 0.0,
                  line_spacing: float = 0.0) -> CombState:
  """Comb produced by a phase modulator acting on a monochromatic field.

  E_k = e0 sum_p i^(k-p) J_(k-2p)(m) J_p(epsilon m) e^(-i p phi). The
  second harmonic term enters as the Jacobi-Anger series of
  epsilon*m*cos(2 Omega t + phi), upsampled by two and convolved with the
  first harmonic series.
  """
  if not (math.isfinite(e0) and e0 > 0):
    raise ConfigError('Field amplitude must be positive, got {}.'.format(e0))
  tol = config.truncation_tol
  first, first_kernel = jacobi_anger_kernel(config.m, tol)
  second, second_kernel = jacobi_anger_kernel(config.epsilon * config.m, tol)
  second_kernel = second_kernel * np.exp(-1j * np.arange(-second, second + 1) * config.phi)
  upsampled = np.zeros(4 * second + 1, dtype=complex)
  upsampled[::2] = second_kernel
  amplitudes = e0 * np.convolve(first_kernel, upsampled)
  center_offset, amplitudes = _trim(-first - 2 * second, amplitudes, tol * e0)
  return CombState(center_offset, amplitudes, base_frequency, line_spacing)


def apply_filter(comb: CombState, filter_shape: FilterShape) -> CombState:
  factors = filter_shape.power_factors(comb.k_min, comb.k_max)
  return comb.with_amplitudes(comb.center_offset, comb.amplitudes * np.sqrt(factors))


def _check_mixing(config: ModulatorConfig):
  if config.epsilon != 0:
    raise UnsupportedConfigurationError(
        'Second harmonic correction is only modelled for comb generation, got epsilon={} on '
        'the mixing modulator.'.format(config.epsilon))


def phase_modulate(comb: CombState, config: ModulatorConfig) -> CombState:
  """E_k -> sum_p E_p i^(k-p) J_(k-p)(m); the comb widens by the kernel support."""
  _check_mixing(config)
  max_order, kernel = jacobi_anger_kernel(config.m, config.truncation_tol)
  return comb.with_amplitudes(comb.center_offset - max_order,
                              np.convolve(comb.amplitudes, kernel))


def phase_modulate_batch(center_offset: int, amplitudes: np.ndarray,
                         config: ModulatorConfig) -> Tuple[int, np.ndarray]:
  """Row-wise phase_modulate of an (n, L) amplitude matrix sharing one index range."""
  _check_mixing(config)
  max_order, kernel = jacobi_anger_kernel(config.m, config.truncation_tol)
  rows, width = amplitudes.shape
  out = np.zeros((rows, width + kernel.size - 1), dtype=complex)
  for tap, coefficient in enumerate(kernel):
    out[:, tap:tap + width] += coefficient * amplitudes
  return center_offset - max_order, out


def total_intensity(comb: CombState,
                    filter_shape: FilterShape,
                    dark_noise_sigma: float = 0.0,
                    noise_seed: Optional[int] = None) -> PhotodiodeReading:
  """Photodiode reading behind a filter: sum_k |E_k|^2 F_k, plus dark noise."""
  if dark_noise_sigma < 0:
    raise ConfigError('Dark noise sigma must be non-negative, got {}.'.format(dark_noise_sigma))
  factors = filter_shape.power_factors(comb.k_min, comb.k_max)
  intensity = float(math.fsum(comb.powers * factors))
  if dark_noise_sigma > 0 and noise_seed is not None:
    rng = np.random.default_rng(noise_seed)
    intensity = max(0.0, intensity + rng.normal(0.0, dark_noise_sigma))
  return PhotodiodeReading(intensity, dark_noise_sigma)


def line_power(comb: CombState, k: int) -> float:
  return abs(comb.amplitude(k))**2


def comb_spectrum(comb: CombState, floor_db: float = -300.0) -> np.ndarray:
  """Rows of (k, line power in dB relative to the strongest line)."""
  powers = comb.powers
  peak = powers.max() or 1.0
  relative = 10.0 * np.log10(np.maximum(powers / peak, 10.0**(floor_db / 10.0)))
  return np.column_stack([comb.indices, relative])
