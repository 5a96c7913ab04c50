"""Repeated train/test benchmarks, parameter sweeps and baselines."""
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from dataclasses_json import dataclass_json
import itertools
import logging
import math
from typing import Callable, List, Optional, Sequence, Tuple

import numpy as np

from . import elm, tasks
from .config import CSource, RunConfig, SweepGrid, WeightingMode, config_hash, with_cell
from .elm import HiddenBatch, TaskDataset, TaskKind
from .error import CapacityError, ConfigError, Error, RepeatFailure
from .tasks import Metrics, MetricKind, TabularSchema

# Sub-stream of the per-repeat generator that drives photodiode dark noise.
_NOISE_STREAM = 1

_TABULAR = {
    'iris': TabularSchema.IRIS,
    'wine': TabularSchema.WINE,
    'banknote': TabularSchema.BANKNOTE,
}

FeatureMap = Callable[[np.ndarray, RunConfig], HiddenBatch]


@dataclass_json
@dataclass
class RepeatOutcome:
  repeat_index: int
  score: float
  test_indices: List[int] = field(default_factory=list)
  predictions: List[float] = field(default_factory=list)


@dataclass_json
@dataclass
class BenchmarkResult:
  task: str
  metrics: Metrics
  selected_lambda: Optional[float]
  lambda_medians: List[Tuple[float, float]] = field(default_factory=list)
  outcomes: List[RepeatOutcome] = field(default_factory=list)
  config_hash: str = ''
  seed: int = 0


def load_task(cfg: RunConfig) -> TaskDataset:
  """Dataset named by cfg.task; Iris and Wine are materialized when absent."""
  if cfg.task == 'nlc':
    return tasks.nlc_generate(cfg.nlc_config())
  schema = _TABULAR[cfg.task]
  path = tasks.dataset_path(schema, cfg.data_dir)
  if not path.exists():
    if schema is TabularSchema.BANKNOTE:
      raise Error('Dataset file {} is missing; place the banknote authentication data there.'.
                  format(path))
    logging.info('%s is missing, writing the packaged copy.', path)
    tasks.materialize_dataset(schema, cfg.data_dir)
  n_features = cfg.banknote_features if schema is TabularSchema.BANKNOTE else None
  return tasks.load_tabular_task(path, schema, n_features)


def comb_features(attenuations: np.ndarray, cfg: RunConfig) -> HiddenBatch:
  return elm.hidden_batch(attenuations, cfg.pm1(), cfg.pm2(), elm.E0, cfg.placement, cfg.threads)


def input_features(attenuations: np.ndarray, cfg: RunConfig) -> HiddenBatch:
  return elm.input_power_matrix(attenuations, cfg.pm1(), elm.E0, cfg.placement)


def _optical_predictions(cfg: RunConfig, batch: HiddenBatch, ws: elm.WeightSet,
                         dataset: TaskDataset, test: np.ndarray,
                         rng: np.random.Generator) -> Tuple[np.ndarray, np.ndarray]:
  """Decisions from the photodiode readings of the test combs.

  A learned C consumes the first test acquisitions, which are then excluded
  from scoring. Returns (decisions, scored test indices).
  """
  ws = elm.split_weights(ws)
  test_batch = HiddenBatch(batch.center_offset, batch.powers[test])
  readings = [
      elm.batch_readout(test_batch, *elm.readout_filters(ws, j), cfg.dark_noise_sigma, rng)
      for j in range(ws.n_outputs)
  ]
  if cfg.c_source is CSource.LEARNED:
    n_c = max(3, math.ceil(round(cfg.c_fraction * test.size, 9)))
    if n_c >= test.size:
      raise ConfigError('{} test samples leave none to score after training C on {}.'.format(
          test.size, n_c))
    c = np.array([
        elm.train_c(reading[:n_c], dataset.targets[test[:n_c], j])
        for j, reading in enumerate(readings)
    ])
    scored = slice(n_c, None)
  else:
    c = np.array([elm.analytic_c(ws, j) for j in range(ws.n_outputs)])
    scored = slice(None)
  ws.c = c
  i1 = np.column_stack([reading[scored, 0] for reading in readings])
  i2 = np.column_stack([reading[scored, 1] for reading in readings])
  return elm.predict_optical(i1, i2, c, dataset.task_kind), test[scored]


def _run_repeat(cfg: RunConfig, dataset: TaskDataset, repeat_index: int,
                features: FeatureMap) -> List[RepeatOutcome]:
  """One split, scored for every lambda of the grid."""
  train, test = tasks.split(dataset, cfg.split_plan(), repeat_index)
  attenuations = elm.preprocess(dataset, cfg.preprocess_config(), train)
  batch = features(attenuations, cfg)
  rng = np.random.default_rng([cfg.seed, repeat_index, _NOISE_STREAM])
  h = elm.notch_readings(batch.window(), cfg.dark_noise_sigma, rng)
  decisions = dataset.target_decisions()
  outcomes = []
  for lam in cfg.lambdas:
    ws = elm.train_digital(h[train], dataset.targets[train], lam, cfg.mapping)
    if cfg.mode is WeightingMode.DIGITAL:
      predictions, scored = elm.predict_digital(h[test], ws, dataset.task_kind), test
    else:
      predictions, scored = _optical_predictions(cfg, batch, ws, dataset, test, rng)
    outcomes.append(
        RepeatOutcome(repeat_index, tasks.score(predictions, decisions[scored], dataset.task_kind),
                      scored.tolist(), np.asarray(predictions, dtype=float).tolist()))
  return outcomes


def _select_lambda(lambdas: Sequence[float], scores: List[List[float]],
                   metric: MetricKind) -> Tuple[int, List[Tuple[float, float]]]:
  """Best median score; ties go to the earlier lambda of the grid."""
  medians = [(float(lam), float(np.median(values))) for lam, values in zip(lambdas, scores)]
  best = 0
  for i, (_, median) in enumerate(medians):
    if tasks.is_better(median, medians[best][1], metric):
      best = i
  return best, medians


def _benchmark(cfg: RunConfig, dataset: Optional[TaskDataset], features: FeatureMap,
               keep_predictions: bool) -> BenchmarkResult:
  cfg.validate()
  if dataset is None:
    dataset = load_task(cfg)
  metric = tasks.metric_for(dataset.task_kind)
  per_lambda = [[] for _ in cfg.lambdas]
  for repeat_index in range(cfg.n_repeats):
    try:
      outcomes = _run_repeat(cfg, dataset, repeat_index, features)
    except Exception as e:
      raise RepeatFailure(repeat_index, e)
    for collected, outcome in zip(per_lambda, outcomes):
      collected.append(outcome)
  best, medians = _select_lambda(cfg.lambdas, [[o.score for o in c] for c in per_lambda], metric)
  if len(cfg.lambdas) > 1:
    logging.warning('Lambda %g was selected on test scores; the reported %s is optimistic.',
                    cfg.lambdas[best], metric.value)
  chosen = per_lambda[best]
  if not keep_predictions:
    chosen = [RepeatOutcome(o.repeat_index, o.score) for o in chosen]
  result = BenchmarkResult(dataset.name, Metrics.from_scores([o.score for o in chosen], metric),
                           float(cfg.lambdas[best]), medians, chosen, config_hash(cfg), cfg.seed)
  logging.info('%s: median %s %.4f over %d repeats (lambda %g).', dataset.name, metric.value,
               result.metrics.median, cfg.n_repeats, result.selected_lambda)
  return result


def run_benchmark(cfg: RunConfig,
                  dataset: Optional[TaskDataset] = None,
                  keep_predictions: bool = False) -> BenchmarkResult:
  """Comb ELM scored over cfg.n_repeats random splits.

  Every repeat trains one weight set per lambda; the reported metrics belong
  to the lambda with the best median.
  """
  return _benchmark(cfg, dataset, comb_features, keep_predictions)


def perceptron_baseline(cfg: RunConfig,
                        dataset: Optional[TaskDataset] = None,
                        keep_predictions: bool = False) -> BenchmarkResult:
  """Same pipeline with the encoded input powers as H, skipping the mixing modulator."""
  return _benchmark(cfg, dataset, input_features, keep_predictions)


def svm_baseline(cfg: RunConfig, dataset: Optional[TaskDataset] = None) -> BenchmarkResult:
  """RBF support vector classifier on the min-max scaled features, same splits."""
  from sklearn.svm import SVC

  cfg.validate()
  if dataset is None:
    dataset = load_task(cfg)
  metric = tasks.metric_for(dataset.task_kind)
  decisions = dataset.target_decisions()
  labels = decisions if dataset.task_kind is not TaskKind.SYMBOL_SNAP else decisions.astype(str)
  outcomes = []
  for repeat_index in range(cfg.n_repeats):
    train, test = tasks.split(dataset, cfg.split_plan(), repeat_index)
    low = dataset.features[train].min(axis=0)
    span = np.ptp(dataset.features[train], axis=0)
    span[span == 0] = 1.0
    scaled = np.clip((dataset.features - low) / span, 0.0, 1.0)
    try:
      classifier = SVC(kernel='rbf', gamma='scale').fit(scaled[train], labels[train])
    except ValueError as e:
      raise RepeatFailure(repeat_index, e)
    predicted = classifier.predict(scaled[test])
    if dataset.task_kind is TaskKind.SYMBOL_SNAP:
      predicted = predicted.astype(float)
    outcomes.append(
        RepeatOutcome(repeat_index, tasks.score(predicted, decisions[test], dataset.task_kind)))
  return BenchmarkResult(dataset.name, Metrics.from_scores([o.score for o in outcomes], metric),
                         None, [], outcomes, config_hash(cfg), cfg.seed)


@dataclass_json
@dataclass
class SweepCell:
  d: int
  m1: float
  m2: float
  metrics: Optional[Metrics] = None
  selected_lambda: Optional[float] = None
  error: Optional[str] = None


@dataclass_json
@dataclass
class SweepResult:
  task: str
  d_values: List[int]
  m1_values: List[float]
  m2_values: List[float]
  cells: List[SweepCell]
  repeats_per_cell: int
  config_hash: str = ''
  seed: int = 0

  def cell(self, d: int, m1: float, m2: float) -> SweepCell:
    for cell in self.cells:
      if cell.d == d and cell.m1 == m1 and cell.m2 == m2:
        return cell
    raise KeyError((d, m1, m2))

  def surface(self, d: int) -> np.ndarray:
    """(len(m1_values), len(m2_values)) medians for one d; failed cells are NaN."""
    values = np.full((len(self.m1_values), len(self.m2_values)), np.nan)
    for i, m1 in enumerate(self.m1_values):
      for j, m2 in enumerate(self.m2_values):
        metrics = self.cell(d, m1, m2).metrics
        if metrics is not None:
          values[i, j] = metrics.median
    return values


def run_sweep(cfg: RunConfig, grid: SweepGrid, dataset: Optional[TaskDataset] = None) -> SweepResult:
  """Benchmarks every (d, m1, m2) cell of the grid.

  Cells share the master seed, so they see the same splits and differ only
  in their optical parameters. epsilon and phi stay at the run values for
  every m1. A failing cell is recorded and skipped.
  """
  cfg.validate()
  d_values, m1_values, m2_values = grid.axes(cfg)
  n_cells = len(d_values) * len(m1_values) * len(m2_values)
  if n_cells > grid.max_cells:
    raise CapacityError('Sweep of {} cells exceeds the limit of {}.'.format(
        n_cells, grid.max_cells))
  if grid.repeats_per_cell < 1:
    raise ConfigError('At least one repeat per cell is needed.')
  if dataset is None:
    dataset = load_task(cfg)

  def run_cell(point) -> SweepCell:
    d, m1, m2 = point
    cell = SweepCell(d, m1, m2)
    try:
      result = run_benchmark(with_cell(cfg, d, m1, m2, grid.repeats_per_cell), dataset)
    except Error as e:
      logging.warning('Sweep cell d=%d m1=%g m2=%g failed: %s', d, m1, m2, e)
      cell.error = str(e)
      return cell
    cell.metrics, cell.selected_lambda = result.metrics, result.selected_lambda
    return cell

  points = list(itertools.product(d_values, m1_values, m2_values))
  logging.info('Sweeping %d cells with %d repeats each.', n_cells, grid.repeats_per_cell)
  if cfg.threads > 1:
    with ThreadPoolExecutor(max_workers=cfg.threads) as executor:
      cells = list(executor.map(run_cell, points))
  else:
    cells = [run_cell(point) for point in points]
  return SweepResult(dataset.name, list(d_values), list(m1_values), list(m2_values), cells,
                     grid.repeats_per_cell, config_hash(cfg, grid), cfg.seed)


# Noise levels for the equalization scan: 8 to 24 dB, plus 28 and 32 dB.
DEFAULT_SNR_VALUES = tuple(range(8, 25, 2)) + (28, 32)


def snr_scan(cfg: RunConfig,
             snr_values: Sequence[Optional[float]] = DEFAULT_SNR_VALUES,
             baseline: bool = False) -> List[Tuple[Optional[float], BenchmarkResult]]:
  """Symbol error rate of the equalizer across channel noise levels."""
  if cfg.task != 'nlc':
    raise ConfigError('SNR scans apply to the nlc task, not {}.'.format(cfg.task))
  results = []
  for snr_db in snr_values:
    point = replace(cfg, snr_db=None if snr_db is None else float(snr_db))
    runner = perceptron_baseline if baseline else run_benchmark
    result = runner(point)
    logging.info('SNR %s dB: SER %.4g', snr_db, result.metrics.median)
    results.append((point.snr_db, result))
  return results

