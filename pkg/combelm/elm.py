"""Extreme learning machine on a frequency comb.

Input features become attenuations of the central comb lines, the second
phase modulator mixes the lines into the hidden layer, and the powers of
the 31 central hidden lines form H. Output weights are trained by ridge
regression and applied either digitally (y = h.W) or optically, as two
non-negative readout filters whose photodiode readings are recombined as
y = C+ I1 + C- I2 + C0.
"""
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace
from dataclasses_json import dataclass_json
import enum
import logging
from typing import Optional, Sequence, Tuple

import numpy as np

from . import numerics, optics
from .error import CapacityError, ConfigError, UnsupportedConfigurationError
from .optics import BLOCK, CombState, FilterShape, ModulatorConfig

HIDDEN_K_MIN = -15
HIDDEN_K_MAX = 15
HIDDEN_NODES = HIDDEN_K_MAX - HIDDEN_K_MIN + 1
SYMBOLS = (-3.0, -1.0, 1.0, 3.0)
E0 = 1.0


class TaskKind(enum.Enum):
  MULTI_CLASS_ONE_HOT = 'multiclass'
  BINARY_THRESHOLD = 'binary'
  SYMBOL_SNAP = 'symbol'


class WeightMapping(enum.Enum):
  DB_LINEAR = 'db-linear'
  POWER_LINEAR = 'power-linear'


class InputMapping(enum.Enum):
  DB_LINEAR = 'db-linear'  # Attenuation in dB linear in the scaled feature.
  POWER_LINEAR = 'power-linear'  # Transmitted power linear in the scaled feature.


class FeatureLayout(enum.Enum):
  CONSECUTIVE = 'consecutive'  # u1 x d, u2 x d, ...
  INTERLEAVED = 'interleaved'  # u1..uN, repeated d times


class Placement(enum.Enum):
  CENTRAL = 'central'
  STRONGEST = 'strongest'


@dataclass_json
@dataclass(frozen=True)
class PreprocessConfig:
  d: int = 1
  attenuation_floor_db: float = -30.0
  attenuation_ceiling_db: float = 0.0
  layout: FeatureLayout = FeatureLayout.CONSECUTIVE
  input_mapping: InputMapping = InputMapping.DB_LINEAR

  def __post_init__(self):
    if not 1 <= self.d <= HIDDEN_NODES:
      raise ConfigError('Replication factor d={} outside [1, {}].'.format(self.d, HIDDEN_NODES))
    if not (optics.MIN_ATTENUATION_DB <= self.attenuation_floor_db < self.attenuation_ceiling_db
            <= 0.0):
      raise ConfigError('Attenuation range [{}, {}] dB must satisfy {} <= floor < ceiling <= 0.'.
                        format(self.attenuation_floor_db, self.attenuation_ceiling_db,
                               optics.MIN_ATTENUATION_DB))


@dataclass(eq=False)
class TaskDataset:
  name: str
  features: np.ndarray
  targets: np.ndarray
  task_kind: TaskKind
  class_labels: Tuple[str, ...] = ()
  symbol_set: Tuple[float, ...] = ()
  sequence: Optional[object] = None  # NLC symbol/channel sequence, when synthesized.

  def __post_init__(self):
    self.features = numerics.as_real_matrix(self.features, 'features')
    self.targets = numerics.as_real_matrix(self.targets, 'targets')
    if self.features.shape[0] != self.targets.shape[0]:
      raise ConfigError('{} features rows but {} target rows.'.format(
          self.features.shape[0], self.targets.shape[0]))
    if self.task_kind is TaskKind.SYMBOL_SNAP and tuple(self.symbol_set) != SYMBOLS:
      raise ConfigError('Symbol set must be {}, got {}.'.format(SYMBOLS, self.symbol_set))

  @property
  def n_samples(self) -> int:
    return self.features.shape[0]

  @property
  def n_features(self) -> int:
    return self.features.shape[1]

  def target_decisions(self) -> np.ndarray:
    """Targets expressed in the same form as the predictions."""
    if self.task_kind is TaskKind.MULTI_CLASS_ONE_HOT:
      return np.argmax(self.targets, axis=1)
    if self.task_kind is TaskKind.BINARY_THRESHOLD:
      return self.targets[:, 0].astype(int)
    return self.targets[:, 0]


@dataclass(eq=False)
class WeightSet:
  w: np.ndarray  # (31, n_outputs)
  w_plus: Optional[np.ndarray] = None
  w_minus: Optional[np.ndarray] = None
  c: Optional[np.ndarray] = None  # (n_outputs, 3): C+, C-, C0
  weight_mapping: WeightMapping = WeightMapping.DB_LINEAR

  @property
  def n_outputs(self) -> int:
    return self.w.shape[1]


@dataclass(frozen=True, eq=False)
class HiddenBatch:
  """Powers of many hidden combs sharing one line index range."""
  center_offset: int
  powers: np.ndarray  # (n, L)

  def window(self, k_lo: int = HIDDEN_K_MIN, k_hi: int = HIDDEN_K_MAX) -> np.ndarray:
    return optics.window_slice(self.powers, self.center_offset, k_lo, k_hi)

  def readout(self, filter_shape: FilterShape) -> np.ndarray:
    """Noiseless photodiode readings behind filter_shape, one per comb."""
    k_max = self.center_offset + self.powers.shape[1] - 1
    return self.powers @ filter_shape.power_factors(self.center_offset, k_max)


def replicate(attenuations: np.ndarray, d: int,
              layout: FeatureLayout = FeatureLayout.CONSECUTIVE) -> np.ndarray:
  """Stretches every row so each feature feeds d input nodes."""
  attenuations = np.atleast_2d(attenuations)
  if layout is FeatureLayout.INTERLEAVED:
    return np.tile(attenuations, (1, d))
  return np.repeat(attenuations, d, axis=1)


def preprocess(raw: TaskDataset, cfg: PreprocessConfig, train_indices: Sequence[int]) -> np.ndarray:
  """Maps features to attenuations in dB with training-row min-max statistics."""
  train_indices = np.asarray(train_indices, dtype=int)
  if train_indices.size == 0:
    raise ConfigError('Preprocessing needs at least one training row.')
  train = raw.features[train_indices]
  low, high = train.min(axis=0), train.max(axis=0)
  span = high - low
  constant = span == 0
  for column in np.nonzero(constant)[0]:
    logging.warning('Feature %d of %s is constant on the training rows, encoded at %.1f dB.',
                    column, raw.name, cfg.attenuation_ceiling_db)
  scaled = np.clip((raw.features - low) / np.where(constant, 1.0, span), 0.0, 1.0)
  scaled[:, constant] = 1.0
  floor, ceiling = cfg.attenuation_floor_db, cfg.attenuation_ceiling_db
  if cfg.input_mapping is InputMapping.POWER_LINEAR:
    low_power, high_power = 10.0**(floor / 10.0), 10.0**(ceiling / 10.0)
    attenuations = np.clip(10.0 * np.log10(low_power + (high_power - low_power) * scaled), floor,
                           ceiling)
  else:
    attenuations = floor + (ceiling - floor) * scaled
  return replicate(attenuations, cfg.d, cfg.layout)


def encoding_lines(n_values: int,
                   placement: Placement = Placement.CENTRAL,
                   comb: Optional[CombState] = None) -> np.ndarray:
  """Line indices k carrying the n_values encoded attenuations, in order."""
  if n_values > HIDDEN_NODES:
    raise CapacityError('{} input values exceed the {} encodable lines.'.format(
        n_values, HIDDEN_NODES))
  if placement is Placement.STRONGEST:
    if comb is None:
      raise ConfigError('Strongest-line placement needs the blank comb.')
    powers = comb.window_powers(HIDDEN_K_MIN, HIDDEN_K_MAX)
    order = np.argsort(-powers, kind='stable')
    return np.sort(order[:n_values]) + HIDDEN_K_MIN
  # Odd M is centred; even M takes the extra line on the left.
  return np.arange(n_values) - n_values // 2


def encode_input(attens: Sequence[float],
                 placement: Placement = Placement.CENTRAL,
                 comb: Optional[CombState] = None) -> FilterShape:
  """Input filter: encoded lines get their attenuation, every other line 0 dB."""
  attens = [float(a) for a in attens]
  lines = encoding_lines(len(attens), placement, comb)
  if not attens:
    return FilterShape.pass_through()
  k_lo = int(lines[0])
  shape = [0.0] * (int(lines[-1]) - k_lo + 1)
  for k, value in zip(lines, attens):
    shape[k - k_lo] = value
  return FilterShape(k_lo, tuple(shape))


def forward(input_filter: FilterShape,
            pm1: ModulatorConfig,
            pm2: ModulatorConfig,
            e0: float = E0) -> np.ndarray:
  """The 31 hidden-node powers for one input filter."""
  comb = optics.generate_comb(e0, pm1)
  hidden = optics.phase_modulate(optics.apply_filter(comb, input_filter), pm2)
  return np.array([optics.line_power(hidden, k) for k in range(HIDDEN_K_MIN, HIDDEN_K_MAX + 1)])


def _input_fields(attenuations: np.ndarray, pm1: ModulatorConfig, e0: float,
                  placement: Placement) -> Tuple[int, np.ndarray]:
  attenuations = np.atleast_2d(np.asarray(attenuations, dtype=float))
  comb = optics.generate_comb(e0, pm1)
  lines = encoding_lines(attenuations.shape[1], placement, comb)
  k_lo = min(comb.k_min, HIDDEN_K_MIN)
  k_hi = max(comb.k_max, HIDDEN_K_MAX)
  blank = optics.window_slice(comb.amplitudes, comb.center_offset, k_lo, k_hi)
  factors = np.ones((attenuations.shape[0], blank.size))
  factors[:, lines - k_lo] = 10.0**(attenuations / 10.0)
  return k_lo, blank * np.sqrt(factors)


def input_power_matrix(attenuations: np.ndarray,
                       pm1: ModulatorConfig,
                       e0: float = E0,
                       placement: Placement = Placement.CENTRAL) -> HiddenBatch:
  """Powers of the encoded input combs, bypassing the mixing modulator."""
  k_lo, fields = _input_fields(attenuations, pm1, e0, placement)
  return HiddenBatch(k_lo, np.abs(fields)**2)


def hidden_batch(attenuations: np.ndarray,
                 pm1: ModulatorConfig,
                 pm2: ModulatorConfig,
                 e0: float = E0,
                 placement: Placement = Placement.CENTRAL,
                 threads: int = 1) -> HiddenBatch:
  """Hidden combs for every row of an attenuation matrix.

  Rows are independent; with threads > 1 they are processed in chunks and
  merged back in input order.
  """
  k_lo, fields = _input_fields(attenuations, pm1, e0, placement)
  if threads > 1 and fields.shape[0] > 1:
    chunks = np.array_split(fields, min(threads, fields.shape[0]))
    with ThreadPoolExecutor(max_workers=threads) as executor:
      results = list(
          executor.map(lambda chunk: optics.phase_modulate_batch(k_lo, chunk, pm2), chunks))
    offset = results[0][0]
    hidden = np.concatenate([amplitudes for _, amplitudes in results])
  else:
    offset, hidden = optics.phase_modulate_batch(k_lo, fields, pm2)
  return HiddenBatch(offset, np.abs(hidden)**2)


def notch_readings(h: np.ndarray, dark_noise_sigma: float,
                   rng: Optional[np.random.Generator]) -> np.ndarray:
  """Node powers as read by a photodiode behind a notch filter."""
  if dark_noise_sigma <= 0 or rng is None:
    return h
  return np.maximum(0.0, h + rng.normal(0.0, dark_noise_sigma, size=h.shape))


def build_hidden_matrix(attenuations: np.ndarray,
                        pm1: ModulatorConfig,
                        pm2: ModulatorConfig,
                        e0: float = E0,
                        placement: Placement = Placement.CENTRAL,
                        threads: int = 1,
                        dark_noise_sigma: float = 0.0,
                        rng: Optional[np.random.Generator] = None) -> np.ndarray:
  """H with one row of 31 hidden-node powers per input row."""
  batch = hidden_batch(attenuations, pm1, pm2, e0, placement, threads)
  return notch_readings(batch.window(), dark_noise_sigma, rng)


def train_digital(h: np.ndarray,
                  y: np.ndarray,
                  lam: float,
                  mapping: WeightMapping = WeightMapping.DB_LINEAR) -> WeightSet:
  w = numerics.ridge_solve(h, numerics.as_real_matrix(y, 'Y'), lam)
  return WeightSet(w=w, weight_mapping=mapping)


def decide(outputs: np.ndarray, kind: TaskKind) -> np.ndarray:
  """Decision rule on an (n, n_outputs) matrix of output node values."""
  outputs = numerics.as_real_matrix(outputs, 'outputs')
  if kind is TaskKind.MULTI_CLASS_ONE_HOT:
    return np.argmax(outputs, axis=1)
  if kind is TaskKind.BINARY_THRESHOLD:
    return (outputs[:, 0] > 0.5).astype(int)
  symbols = np.asarray(SYMBOLS)
  return symbols[np.argmin(np.abs(outputs[:, :1] - symbols), axis=1)]


def predict_digital(h: np.ndarray, ws: WeightSet, kind: TaskKind):
  """Decisions for one hidden layer (1-D h) or one per row of H."""
  single = np.ndim(h) == 1
  outputs = np.atleast_2d(np.asarray(h, dtype=float)) @ ws.w
  decisions = decide(outputs, kind)
  return decisions[0] if single else decisions


def split_weights(ws: WeightSet) -> WeightSet:
  return replace(ws, w_plus=np.maximum(ws.w, 0.0), w_minus=np.maximum(-ws.w, 0.0))


def _joint_scale(*halves: np.ndarray) -> Tuple[float, float]:
  values = np.concatenate([np.ravel(half) for half in halves])
  nonzero = values[values > 0]
  if nonzero.size == 0:
    return 0.0, 0.0
  return float(nonzero.min()), float(nonzero.max())


def weights_to_filter(w_half: np.ndarray,
                      mapping: WeightMapping,
                      scale: Optional[Tuple[float, float]] = None,
                      floor_db: float = optics.MIN_ATTENUATION_DB,
                      ceiling_db: float = 0.0) -> FilterShape:
  """Readout filter for one non-negative weight half over the hidden window.

  scale is the (smallest non-zero, largest) weight shared by both halves;
  zero weights and lines outside the window are blocked.
  """
  w_half = np.ravel(np.asarray(w_half, dtype=float))
  if w_half.size != HIDDEN_NODES:
    raise ConfigError('Expected {} weights, got {}.'.format(HIDDEN_NODES, w_half.size))
  if np.any(w_half < 0):
    raise ConfigError('Readout weights must be non-negative.')
  low, high = scale if scale is not None else _joint_scale(w_half)
  if high <= 0:
    return FilterShape(HIDDEN_K_MIN, (BLOCK,) * HIDDEN_NODES, outside=BLOCK)
  if mapping is WeightMapping.POWER_LINEAR:
    return FilterShape.from_power_factors(HIDDEN_K_MIN, np.minimum(w_half / high, 1.0))
  attenuations = []
  for weight in w_half:
    if weight == 0:
      attenuations.append(BLOCK)
    else:
      fraction = (weight - low) / (high - low) if high > low else 1.0
      fraction = min(max(fraction, 0.0), 1.0)
      attenuations.append(floor_db + (ceiling_db - floor_db) * fraction)
  return FilterShape(HIDDEN_K_MIN, tuple(attenuations), outside=BLOCK)


def readout_filters(ws: WeightSet, output_index: int = 0) -> Tuple[FilterShape, FilterShape]:
  """(F+, F-) for one output node, both on the scale of the joint weights."""
  if ws.w_plus is None or ws.w_minus is None:
    ws = split_weights(ws)
  w_plus, w_minus = ws.w_plus[:, output_index], ws.w_minus[:, output_index]
  scale = _joint_scale(w_plus, w_minus)
  return (weights_to_filter(w_plus, ws.weight_mapping, scale),
          weights_to_filter(w_minus, ws.weight_mapping, scale))


def optical_readout(hidden: CombState,
                    f_plus: FilterShape,
                    f_minus: FilterShape,
                    dark_noise_sigma: float = 0.0,
                    seeds: Tuple[Optional[int], Optional[int]] = (None, None)) -> Tuple[float, float]:
  i1 = optics.total_intensity(hidden, f_plus, dark_noise_sigma, seeds[0]).intensity
  i2 = optics.total_intensity(hidden, f_minus, dark_noise_sigma, seeds[1]).intensity
  return i1, i2


def batch_readout(batch: HiddenBatch,
                  f_plus: FilterShape,
                  f_minus: FilterShape,
                  dark_noise_sigma: float = 0.0,
                  rng: Optional[np.random.Generator] = None) -> np.ndarray:
  """(n, 2) photodiode readings (I1, I2) for every comb of the batch."""
  readings = np.column_stack([batch.readout(f_plus), batch.readout(f_minus)])
  if dark_noise_sigma > 0 and rng is not None:
    readings = np.maximum(0.0, readings + rng.normal(0.0, dark_noise_sigma, readings.shape))
  return readings


def train_c(readings: np.ndarray, targets: np.ndarray) -> np.ndarray:
  """Least-squares (C+, C-, C0) with y ~ C+ I1 + C- I2 + C0."""
  readings = numerics.as_real_matrix(readings, 'readings')
  targets = np.ravel(np.asarray(targets, dtype=float))
  if readings.shape[0] < 3:
    raise ConfigError('Training C needs at least 3 readings, got {}.'.format(readings.shape[0]))
  design = np.column_stack([readings[:, :2], np.ones(readings.shape[0])])
  return numerics.ols_solve(design, targets)


def analytic_c(ws: WeightSet, output_index: int = 0) -> np.ndarray:
  """C implied by W; only proportional readout filters have a closed form."""
  if ws.weight_mapping is not WeightMapping.POWER_LINEAR:
    raise UnsupportedConfigurationError('No closed form for C under {} weight mapping.'.format(
        ws.weight_mapping.value))
  if ws.w_plus is None or ws.w_minus is None:
    ws = split_weights(ws)
  _, high = _joint_scale(ws.w_plus[:, output_index], ws.w_minus[:, output_index])
  return np.array([high, -high, 0.0])


def predict_optical(i1, i2, c: np.ndarray, kind: TaskKind):
  """Evaluates y = C+ I1 + C- I2 + C0 per output node, then the decision rule.

  i1 and i2 are scalars, (n,) vectors for a single output node, or
  (n, n_outputs) matrices; c is (3,) or (n_outputs, 3).
  """
  single = np.ndim(i1) == 0
  c = np.atleast_2d(np.asarray(c, dtype=float))
  i1 = np.asarray(i1, dtype=float).reshape(-1, c.shape[0])
  i2 = np.asarray(i2, dtype=float).reshape(-1, c.shape[0])
  outputs = c[:, 0] * i1 + c[:, 1] * i2 + c[:, 2]
  decisions = decide(outputs, kind)
  return decisions[0] if single else decisions
