"""Benchmark tasks: tabular UCI datasets, nonlinear channel equalization,
train/test splits and scores."""
from dataclasses import dataclass, field
from dataclasses_json import dataclass_json
import enum
import hashlib
import json
import logging
import math
import os
from pathlib import Path
import shutil
from typing import Dict, List, Optional, Sequence, Tuple, Union

import numpy as np

from .elm import SYMBOLS, TaskDataset, TaskKind
from .error import ConfigError, DatasetParseError, Error

DATA_DIR_ENV = 'COMBELM_DATA_DIR'
DEFAULT_DATA_DIR = Path(__file__).resolve().parent / 'data'
CHECKSUMS_FILE = 'checksums.json'

# q(t) = sum over offsets s of tap * u(t + s).
NLC_CHANNEL_TAPS = {
    2: 0.08,
    1: -0.12,
    0: 1.0,
    -1: 0.18,
    -2: -0.1,
    -3: 0.091,
    -4: -0.05,
    -5: 0.04,
    -6: 0.03,
    -7: 0.01,
}
NLC_QUADRATIC = 0.036
NLC_CUBIC = -0.011
# Channel outputs x(t-7) .. x(t+2) are the features for symbol u(t).
NLC_WINDOW = (-7, 2)
_TAP_BEFORE = -min(NLC_CHANNEL_TAPS)
_TAP_AFTER = max(NLC_CHANNEL_TAPS)


class TabularSchema(enum.Enum):
  IRIS = 'iris'
  WINE = 'wine'
  BANKNOTE = 'banknote'


@dataclass(frozen=True)
class _SchemaLayout:
  file_name: str
  feature_counts: Tuple[int, ...]
  label_first: bool
  labels: Dict[str, int]
  class_labels: Tuple[str, ...]
  task_kind: TaskKind
  expected_rows: int


_IRIS_CLASSES = ('Iris-setosa', 'Iris-versicolor', 'Iris-virginica')

# The banknote file has four features; five are accepted for the variant with
# an extra feature column.
_LAYOUTS = {
    TabularSchema.IRIS:
        _SchemaLayout('iris.data', (4,), False, {
            **{name: i for i, name in enumerate(_IRIS_CLASSES)},
            **{name.split('-', 1)[1]: i for i, name in enumerate(_IRIS_CLASSES)}
        }, _IRIS_CLASSES, TaskKind.MULTI_CLASS_ONE_HOT, 150),
    TabularSchema.WINE:
        _SchemaLayout('wine.data', (13,), True, {
            '1': 0,
            '2': 1,
            '3': 2
        }, ('1', '2', '3'), TaskKind.MULTI_CLASS_ONE_HOT, 178),
    TabularSchema.BANKNOTE:
        _SchemaLayout('data_banknote_authentication.txt', (4, 5), False, {
            '0': 0,
            '1': 1
        }, ('genuine', 'forged'), TaskKind.BINARY_THRESHOLD, 1372),
}


def resolve_data_dir(data_dir: Optional[Union[str, Path]] = None) -> Path:
  if data_dir:
    return Path(data_dir)
  return Path(os.environ.get(DATA_DIR_ENV, DEFAULT_DATA_DIR))


def dataset_path(schema: TabularSchema, data_dir: Optional[Union[str, Path]] = None) -> Path:
  return resolve_data_dir(data_dir) / _LAYOUTS[schema].file_name


def load_tabular_task(path: Union[str, Path],
                      schema: TabularSchema,
                      n_features: Optional[int] = None) -> TaskDataset:
  """Parses a comma-separated dataset file, one sample per line.

  n_features pins the feature count; by default any count the schema
  accepts is taken from the first sample and enforced on the rest.
  """
  layout = _LAYOUTS[schema]
  if n_features is not None and n_features not in layout.feature_counts:
    raise ConfigError('{} takes {} features, not {}.'.format(schema.value, layout.feature_counts,
                                                             n_features))
  features, labels = [], []
  with open(path, encoding='utf-8') as f:
    for line_number, line in enumerate(f, start=1):
      line = line.strip()
      if not line:
        continue
      fields = [value.strip() for value in line.split(',')]
      if n_features is None:
        if len(fields) - 1 not in layout.feature_counts:
          raise DatasetParseError(
              path, line_number, 'expected {} columns, found {}'.format(
                  ' or '.join(str(count + 1) for count in layout.feature_counts), len(fields)))
        n_features = len(fields) - 1
      if len(fields) != n_features + 1:
        raise DatasetParseError(path, line_number,
                                'expected {} columns, found {}'.format(n_features + 1, len(fields)))
      label, values = (fields[0], fields[1:]) if layout.label_first else (fields[-1], fields[:-1])
      if label not in layout.labels:
        raise DatasetParseError(path, line_number, 'unknown label {!r}'.format(label))
      try:
        row = [float(value) for value in values]
      except ValueError as e:
        raise DatasetParseError(path, line_number, 'non-numeric feature ({})'.format(e))
      if not all(math.isfinite(value) for value in row):
        raise DatasetParseError(path, line_number, 'non-finite feature')
      features.append(row)
      labels.append(layout.labels[label])
  if not features:
    raise DatasetParseError(path, 0, 'no samples')
  labels = np.array(labels)
  if layout.task_kind is TaskKind.MULTI_CLASS_ONE_HOT:
    targets = np.eye(len(layout.class_labels))[labels]
  else:
    targets = labels[:, np.newaxis].astype(float)
  logging.info('Loaded %d samples with %d features from %s.', len(features), n_features, path)
  return TaskDataset(schema.value, np.array(features), targets, layout.task_kind,
                     layout.class_labels)


def _sha256(path: Path) -> str:
  digest = hashlib.sha256()
  with open(path, 'rb') as f:
    for chunk in iter(lambda: f.read(1 << 16), b''):
      digest.update(chunk)
  return digest.hexdigest()


def _load_checksums(data_dir: Path) -> Dict[str, str]:
  path = data_dir / CHECKSUMS_FILE
  if not path.exists():
    return {}
  with open(path, encoding='utf-8') as f:
    return json.load(f)


def record_checksum(path: Union[str, Path], data_dir: Optional[Union[str, Path]] = None) -> str:
  """Registers the SHA-256 of a dataset file in the data directory manifest."""
  data_dir = resolve_data_dir(data_dir)
  path = Path(path)
  checksums = _load_checksums(data_dir)
  checksums[path.name] = _sha256(path)
  with open(data_dir / CHECKSUMS_FILE, 'w', encoding='utf-8') as f:
    json.dump(checksums, f, indent=2, sort_keys=True)
    f.write('\n')
  return checksums[path.name]


def materialize_dataset(schema: TabularSchema,
                        data_dir: Optional[Union[str, Path]] = None) -> Path:
  """Copies the packaged dataset file into data_dir and registers its checksum.

  The package ships Iris and Wine in the UCI column order; the banknote file
  is not redistributed and has to be placed by hand.
  """
  source = DEFAULT_DATA_DIR / _LAYOUTS[schema].file_name
  if not source.exists():
    raise Error('No packaged copy of {}; place {} in {}.'.format(
        schema.value, _LAYOUTS[schema].file_name, resolve_data_dir(data_dir)))
  path = dataset_path(schema, data_dir)
  if path.resolve() != source.resolve():
    path.parent.mkdir(parents=True, exist_ok=True)
    shutil.copyfile(source, path)
    record_checksum(path, data_dir)
    logging.info('Copied %s to %s.', source.name, path)
  return path


@dataclass
class DatasetStatus:
  schema: TabularSchema
  path: Path
  present: bool
  rows: int = 0
  checksum: Optional[str] = None
  registered: bool = False
  ok: bool = False
  message: str = ''


def validate_datasets(data_dir: Optional[Union[str, Path]] = None) -> List[DatasetStatus]:
  """Checks every dataset file against its schema and the checksum manifest.

  Checksums shipped with the package take precedence over the data
  directory manifest for the files they list.
  """
  data_dir = resolve_data_dir(data_dir)
  checksums = {**_load_checksums(data_dir), **_load_checksums(DEFAULT_DATA_DIR)}
  statuses = []
  for schema, layout in _LAYOUTS.items():
    path = data_dir / layout.file_name
    status = DatasetStatus(schema, path, path.exists())
    if not status.present:
      status.message = 'missing'
      statuses.append(status)
      continue
    try:
      status.rows = load_tabular_task(path, schema).n_samples
    except Error as e:
      status.message = str(e)
      statuses.append(status)
      continue
    status.checksum = _sha256(path)
    status.registered = layout.file_name in checksums
    if status.rows != layout.expected_rows:
      status.message = 'expected {} rows, found {}'.format(layout.expected_rows, status.rows)
    elif status.registered and checksums[layout.file_name] != status.checksum:
      status.message = 'checksum mismatch'
    else:
      status.ok = True
      status.message = 'ok' if status.registered else 'ok (checksum not registered)'
    statuses.append(status)
  return statuses


class SnrReference(enum.Enum):
  POST_NONLINEARITY = 'post'
  PRE_NONLINEARITY = 'pre'


@dataclass_json
@dataclass(frozen=True)
class NlcConfig:
  n_symbols: int = 1000
  snr_db: Optional[float] = None  # None is the noiseless channel.
  seed: int = 0
  reference: SnrReference = SnrReference.POST_NONLINEARITY

  def __post_init__(self):
    if self.n_symbols < 20:
      raise ConfigError('NLC needs at least 20 symbols, got {}.'.format(self.n_symbols))
    if self.snr_db is not None and not 0.0 <= self.snr_db <= 60.0:
      raise ConfigError('SNR {} dB outside [0, 60].'.format(self.snr_db))


@dataclass(eq=False)
class NlcSequence:
  """Channel signals; q, x_clean, noise and x are defined for t in t_channel."""
  u: np.ndarray
  t_channel: np.ndarray
  q: np.ndarray
  x_clean: np.ndarray
  noise: np.ndarray

  @property
  def x(self) -> np.ndarray:
    return self.x_clean + self.noise


def nlc_channel(u: np.ndarray) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
  """Noiseless channel: returns (t, q(t), x(t)) for every t with full tap context."""
  u = np.asarray(u, dtype=float)
  t = np.arange(_TAP_BEFORE, u.size - _TAP_AFTER)
  q = np.zeros(t.size)
  for offset, tap in NLC_CHANNEL_TAPS.items():
    q += tap * u[t + offset]
  return t, q, q + NLC_QUADRATIC * q**2 + NLC_CUBIC * q**3


def nlc_generate(cfg: NlcConfig, symbols: Optional[Sequence[float]] = None) -> TaskDataset:
  """Channel-equalization samples: features x(t-7)..x(t+2), target u(t).

  Symbols lacking the full context are discarded rather than padded.
  symbols replaces the random draw, for synthetic sequences.
  """
  rng = np.random.default_rng(cfg.seed)
  if symbols is None:
    u = rng.choice(np.asarray(SYMBOLS), size=cfg.n_symbols)
  else:
    u = np.asarray(symbols, dtype=float)
  t, q, x_clean = nlc_channel(u)
  before, after = -NLC_WINDOW[0], NLC_WINDOW[1]
  if t.size < before + after + 1:
    raise ConfigError('{} symbols leave no complete channel window.'.format(u.size))
  noise = np.zeros(t.size)
  if cfg.snr_db is not None:
    reference = x_clean if cfg.reference is SnrReference.POST_NONLINEARITY else q
    power = np.mean(reference**2)
    noise = rng.normal(0.0, math.sqrt(power / 10.0**(cfg.snr_db / 10.0)), size=t.size)
  sequence = NlcSequence(u, t, q, x_clean, noise)
  features = np.lib.stride_tricks.sliding_window_view(sequence.x, before + after + 1)
  targets = u[t[before:t.size - after]]
  return TaskDataset('nlc', np.array(features), targets[:, np.newaxis], TaskKind.SYMBOL_SNAP,
                     symbol_set=SYMBOLS, sequence=sequence)


def nlc_write_sequence(dataset: TaskDataset, path: Union[str, Path]):
  """Writes the (t, u, x) channel sequence as tab-separated text."""
  sequence = dataset.sequence
  if sequence is None:
    raise ConfigError('Dataset {} carries no channel sequence.'.format(dataset.name))
  table = np.column_stack([sequence.t_channel, sequence.u[sequence.t_channel], sequence.x])
  np.savetxt(path, table, fmt=['%d', '%g', '%.17g'], delimiter='\t', header='t\tu\tx',
             comments='')


@dataclass_json
@dataclass(frozen=True)
class SplitPlan:
  train_fraction: float = 0.7
  seed: int = 0
  n_repeats: int = 100

  def __post_init__(self):
    if not 0.0 < self.train_fraction < 1.0:
      raise ConfigError('Train fraction {} outside (0, 1).'.format(self.train_fraction))
    if self.n_repeats < 1:
      raise ConfigError('At least one repeat is needed, got {}.'.format(self.n_repeats))


def split(dataset: Union[TaskDataset, int], plan: SplitPlan,
          repeat_index: int) -> Tuple[np.ndarray, np.ndarray]:
  """Random train/test partition; the permutation is seeded by (plan.seed, repeat_index).

  Indices keep the permutation order, which also orders the test-phase
  acquisitions.
  """
  n = dataset if isinstance(dataset, int) else dataset.n_samples
  if n < 2:
    raise ConfigError('Splitting needs at least two samples, got {}.'.format(n))
  permutation = np.random.default_rng([plan.seed, repeat_index]).permutation(n)
  n_train = min(n - 1, math.ceil(round(plan.train_fraction * n, 9)))
  return permutation[:n_train], permutation[n_train:]


class MetricKind(enum.Enum):
  ACCURACY = 'accuracy'
  SER = 'ser'


def metric_for(kind: TaskKind) -> MetricKind:
  return MetricKind.SER if kind is TaskKind.SYMBOL_SNAP else MetricKind.ACCURACY


def is_better(candidate: float, incumbent: float, metric: MetricKind) -> bool:
  if metric is MetricKind.SER:
    return candidate < incumbent
  return candidate > incumbent


@dataclass_json
@dataclass
class Metrics:
  metric: MetricKind
  value: float  # Median over repeats.
  minimum: float
  q1: float
  median: float
  q3: float
  maximum: float
  scores: List[float] = field(default_factory=list)

  @classmethod
  def from_scores(cls, scores: Sequence[float], metric: MetricKind) -> 'Metrics':
    scores = [float(score) for score in scores]
    if not scores:
      raise ConfigError('No scores to summarize.')
    minimum, q1, median, q3, maximum = np.percentile(scores, [0, 25, 50, 75, 100])
    return cls(metric, float(median), float(minimum), float(q1), float(median), float(q3),
               float(maximum), scores)

  @property
  def accuracy(self) -> Optional[float]:
    return self.value if self.metric is MetricKind.ACCURACY else None

  @property
  def ser(self) -> Optional[float]:
    return self.value if self.metric is MetricKind.SER else None


def score(predictions: Sequence, targets: Sequence, kind: TaskKind) -> float:
  predictions, targets = np.asarray(predictions), np.asarray(targets)
  if predictions.shape != targets.shape:
    raise ConfigError('{} predictions for {} targets.'.format(predictions.shape, targets.shape))
  if predictions.size == 0:
    raise ConfigError('Nothing to evaluate.')
  errors = int(np.count_nonzero(predictions != targets))
  if metric_for(kind) is MetricKind.SER:
    return errors / predictions.size
  return 1.0 - errors / predictions.size


def evaluate(predictions: Sequence, targets: Sequence, kind: TaskKind) -> Metrics:
  """Accuracy (classification) or symbol error rate (equalization) of one run."""
  return Metrics.from_scores([score(predictions, targets, kind)], metric_for(kind))
