from dataclasses import replace
import logging

import numpy as np
import pytest

from combelm import elm, experiments, tasks
from combelm.config import CSource, RunConfig, SweepGrid, WeightingMode, with_cell
from combelm.elm import InputMapping, WeightMapping
from combelm.error import CapacityError, ConfigError, Error, RankDeficiencyError, RepeatFailure
from combelm.tasks import MetricKind


@pytest.fixture
def toy_config():
  return RunConfig(task='iris', repeats=4, lambdas=[1e-7])


def _banknote_present():
  return tasks.dataset_path(tasks.TabularSchema.BANKNOTE).exists()


def test_separable_task_is_solved(toy_config, separable_task):
  result = experiments.run_benchmark(toy_config, dataset=separable_task)
  assert result.task == 'toy'
  assert result.metrics.metric is MetricKind.ACCURACY
  assert result.metrics.median == 1.0
  assert result.metrics.minimum >= 0.9
  assert len(result.outcomes) == 4
  assert result.selected_lambda == 1e-7


def test_unregularized_underdetermined_fit_fails(toy_config, separable_task):
  with pytest.raises(RepeatFailure) as error:
    experiments.run_benchmark(replace(toy_config, lambdas=[0.0]), dataset=separable_task)
  assert error.value.repeat_index == 0
  assert isinstance(error.value.cause, RankDeficiencyError)


def test_benchmark_is_deterministic(toy_config, separable_task):
  first = experiments.run_benchmark(toy_config, dataset=separable_task, keep_predictions=True)
  second = experiments.run_benchmark(toy_config, dataset=separable_task, keep_predictions=True)
  assert first.metrics == second.metrics
  assert first.outcomes == second.outcomes
  assert first.config_hash == second.config_hash


def test_seed_changes_splits(toy_config, separable_task):
  first = experiments.run_benchmark(toy_config, dataset=separable_task, keep_predictions=True)
  other = experiments.run_benchmark(replace(toy_config, seed=5), dataset=separable_task,
                                    keep_predictions=True)
  assert first.outcomes[0].test_indices != other.outcomes[0].test_indices


def test_predictions_are_dropped_unless_kept(toy_config, separable_task):
  result = experiments.run_benchmark(toy_config, dataset=separable_task)
  assert all(not o.test_indices and not o.predictions for o in result.outcomes)
  kept = experiments.run_benchmark(toy_config, dataset=separable_task, keep_predictions=True)
  assert all(len(o.test_indices) == 12 == len(o.predictions) for o in kept.outcomes)


def test_lambda_grid_selection_warns(toy_config, separable_task, caplog):
  cfg = replace(toy_config, lambdas=[1e-7, 1e-3, 10.0])
  with caplog.at_level(logging.WARNING):
    result = experiments.run_benchmark(cfg, dataset=separable_task)
  assert 'optimistic' in caplog.text
  assert [lam for lam, _ in result.lambda_medians] == [1e-7, 1e-3, 10.0]
  best = max(median for _, median in result.lambda_medians)
  assert result.metrics.median == best
  first_best = next(lam for lam, median in result.lambda_medians if median == best)
  assert result.selected_lambda == first_best


def test_single_lambda_does_not_warn(toy_config, separable_task, caplog):
  with caplog.at_level(logging.WARNING):
    experiments.run_benchmark(toy_config, dataset=separable_task)
  assert 'optimistic' not in caplog.text


def test_replication_beyond_window_fails(toy_config, separable_task):
  with pytest.raises(RepeatFailure) as error:
    experiments.run_benchmark(replace(toy_config, d=16), dataset=separable_task)
  assert isinstance(error.value.cause, CapacityError)


def test_invalid_config_is_rejected_before_running(separable_task):
  with pytest.raises(ConfigError):
    experiments.run_benchmark(RunConfig(lambdas=[]), dataset=separable_task)
  with pytest.raises(ConfigError):
    experiments.run_benchmark(RunConfig(m2=13.0), dataset=separable_task)


def test_perceptron_equals_unmixed_comb(toy_config, separable_task):
  cfg = replace(toy_config, m2=0.0)
  comb = experiments.run_benchmark(cfg, dataset=separable_task, keep_predictions=True)
  baseline = experiments.perceptron_baseline(cfg, dataset=separable_task, keep_predictions=True)
  assert comb.outcomes == baseline.outcomes


def test_perceptron_equals_unmixed_comb_on_iris(iris_dir):
  cfg = RunConfig(task='iris', d=3, m2=0.0, repeats=3, data_dir=str(iris_dir))
  comb = experiments.run_benchmark(cfg, keep_predictions=True)
  baseline = experiments.perceptron_baseline(cfg, keep_predictions=True)
  for a, b in zip(comb.outcomes, baseline.outcomes):
    assert a.test_indices == b.test_indices
    assert a.predictions == b.predictions


def test_optical_proportional_readout_matches_digital(separable_task):
  digital = RunConfig(repeats=3, lambdas=[1e-3], mapping=WeightMapping.POWER_LINEAR)
  optical = replace(digital, mode=WeightingMode.OPTICAL, c_source=CSource.FROM_WEIGHTS)
  a = experiments.run_benchmark(digital, dataset=separable_task, keep_predictions=True)
  b = experiments.run_benchmark(optical, dataset=separable_task, keep_predictions=True)
  assert a.outcomes == b.outcomes


def test_optical_proportional_readout_matches_digital_on_iris(iris_dir):
  digital = RunConfig(task='iris', d=3, repeats=3, mapping=WeightMapping.POWER_LINEAR,
                      data_dir=str(iris_dir))
  optical = replace(digital, mode=WeightingMode.OPTICAL, c_source=CSource.FROM_WEIGHTS)
  a = experiments.run_benchmark(digital, keep_predictions=True)
  b = experiments.run_benchmark(optical, keep_predictions=True)
  for x, y in zip(a.outcomes, b.outcomes):
    assert x.test_indices == y.test_indices
    assert x.predictions == y.predictions


def test_analytic_c_needs_proportional_filters(separable_task):
  cfg = RunConfig(repeats=1, mode=WeightingMode.OPTICAL, c_source=CSource.FROM_WEIGHTS)
  with pytest.raises(RepeatFailure) as error:
    experiments.run_benchmark(cfg, dataset=separable_task)
  assert isinstance(error.value.cause, ConfigError)


def test_learned_c_scores_remaining_samples(separable_task):
  cfg = RunConfig(repeats=2, lambdas=[1e-3], mode=WeightingMode.OPTICAL)
  result = experiments.run_benchmark(cfg, dataset=separable_task, keep_predictions=True)
  for outcome in result.outcomes:
    assert len(outcome.test_indices) == 12 - 3
    assert 0.0 <= outcome.score <= 1.0


def test_learned_c_needs_samples_left_to_score(separable_task):
  small = elm.TaskDataset('tiny', separable_task.features[18:22], separable_task.targets[18:22],
                          separable_task.task_kind)
  cfg = RunConfig(repeats=1, lambdas=[1e-3], mode=WeightingMode.OPTICAL, train_fraction=0.25)
  with pytest.raises(RepeatFailure):
    experiments.run_benchmark(cfg, dataset=small)


def test_optical_mode_defaults_to_ten_repeats():
  cfg = RunConfig(lambdas=[1e-3], mode=WeightingMode.OPTICAL)
  assert cfg.n_repeats == 10
  assert RunConfig().n_repeats == 100


def test_dark_noise_is_seeded(separable_task):
  cfg = RunConfig(repeats=2, lambdas=[1e-3], dark_noise_sigma=1e-4)
  first = experiments.run_benchmark(cfg, dataset=separable_task, keep_predictions=True)
  second = experiments.run_benchmark(cfg, dataset=separable_task, keep_predictions=True)
  assert first.outcomes == second.outcomes


def test_missing_banknote_file(data_dir):
  with pytest.raises(Error) as error:
    experiments.load_task(RunConfig(task='banknote', data_dir=str(data_dir)))
  assert 'banknote' in str(error.value)


def test_missing_iris_is_materialized(data_dir):
  dataset = experiments.load_task(RunConfig(task='iris', data_dir=str(data_dir)))
  assert dataset.n_samples == 150
  assert tasks.dataset_path(tasks.TabularSchema.IRIS, data_dir).exists()


def test_one_cell_sweep_equals_benchmark(toy_config, separable_task):
  grid = SweepGrid(repeats_per_cell=2)
  result = experiments.run_sweep(toy_config, grid, dataset=separable_task)
  assert len(result.cells) == 1
  cell = result.cells[0]
  assert (cell.d, cell.m1, cell.m2) == (1, 7.87, 2.18)
  single = experiments.run_benchmark(with_cell(toy_config, 1, 7.87, 2.18, 2),
                                     dataset=separable_task)
  assert cell.metrics == single.metrics
  assert cell.selected_lambda == single.selected_lambda
  assert cell.error is None


def test_sweep_surface_and_failed_cells(toy_config, separable_task):
  grid = SweepGrid(m1_values=[2.0, 7.87], m2_values=[0.0, 2.18], d_values=[1, 16],
                   repeats_per_cell=1)
  result = experiments.run_sweep(toy_config, grid, dataset=separable_task)
  assert len(result.cells) == 8
  assert [(c.d, c.m1, c.m2) for c in result.cells[:3]] == [(1, 2.0, 0.0), (1, 2.0, 2.18),
                                                            (1, 7.87, 0.0)]
  for cell in result.cells:
    if cell.d == 16:
      assert cell.metrics is None and 'Repeat 0 failed' in cell.error
    else:
      assert cell.error is None and cell.metrics is not None
  assert result.surface(1).shape == (2, 2)
  assert not np.isnan(result.surface(1)).any()
  assert np.isnan(result.surface(16)).all()
  with pytest.raises(KeyError):
    result.cell(2, 2.0, 0.0)


def test_threaded_sweep_matches_serial(toy_config, separable_task):
  grid = SweepGrid(m1_values=[3.0, 7.87], m2_values=[1.0, 2.18], repeats_per_cell=1)
  serial = experiments.run_sweep(toy_config, grid, dataset=separable_task)
  threaded = experiments.run_sweep(replace(toy_config, threads=3), grid, dataset=separable_task)
  assert serial.cells == threaded.cells


def test_sweep_cell_cap(toy_config, separable_task):
  grid = SweepGrid(m1_values=[1.0, 2.0], m2_values=[1.0, 2.0], max_cells=3)
  with pytest.raises(CapacityError):
    experiments.run_sweep(toy_config, grid, dataset=separable_task)


def test_sweep_needs_repeats(toy_config, separable_task):
  with pytest.raises(ConfigError):
    experiments.run_sweep(toy_config, SweepGrid(repeats_per_cell=0), dataset=separable_task)


def test_snr_scan_requires_equalization_task(toy_config):
  with pytest.raises(ConfigError):
    experiments.snr_scan(toy_config, [20.0])


def test_snr_scan_runs_every_level():
  cfg = RunConfig(task='nlc', n_symbols=200, repeats=2, lambdas=[1e-5])
  results = experiments.snr_scan(cfg, [None, 12])
  assert [snr for snr, _ in results] == [None, 12.0]
  for _, result in results:
    assert result.metrics.metric is MetricKind.SER
    assert 0.0 <= result.metrics.median <= 1.0


def test_default_snr_values():
  assert experiments.DEFAULT_SNR_VALUES == (8, 10, 12, 14, 16, 18, 20, 22, 24, 28, 32)


def test_svm_baseline(toy_config, separable_task):
  result = experiments.svm_baseline(toy_config, dataset=separable_task)
  assert result.selected_lambda is None
  assert result.metrics.median == 1.0
  assert len(result.outcomes) == 4


@pytest.mark.slow
def test_iris_accuracy(iris_dir):
  result = experiments.run_benchmark(RunConfig(task='iris', d=3, data_dir=str(iris_dir)))
  assert result.metrics.median >= 0.90


@pytest.mark.slow
def test_wine_accuracy(data_dir):
  result = experiments.run_benchmark(RunConfig(task='wine', lambdas=[1e-6],
                                               data_dir=str(data_dir)))
  assert result.metrics.median >= 0.93


@pytest.mark.slow
@pytest.mark.skipif(not _banknote_present(), reason='banknote data not installed')
def test_banknote_accuracy():
  result = experiments.run_benchmark(RunConfig(task='banknote', lambdas=[1e-5]))
  assert result.metrics.median >= 0.96


_NLC_LAMBDAS = [1e-10, 1e-9, 1e-8, 1e-7, 1e-6, 1e-5]


@pytest.mark.slow
def test_power_linear_inputs_equalize_channel():
  cfg = RunConfig(task='nlc', d=2, n_symbols=10000, repeats=1, lambdas=_NLC_LAMBDAS,
                  input_mapping=InputMapping.POWER_LINEAR)
  power_linear = experiments.run_benchmark(cfg).metrics.median
  db_linear = experiments.run_benchmark(replace(cfg, input_mapping=InputMapping.DB_LINEAR))
  assert power_linear <= 1e-3
  assert db_linear.metrics.median >= 0.1
  assert power_linear < db_linear.metrics.median / 10


@pytest.mark.slow
@pytest.mark.xfail(strict=False,
                   reason='error floor of the comb readout sits near 3e-4 at 10k symbols')
def test_equalizer_symbol_error_rate():
  cfg = RunConfig(task='nlc', d=2, n_symbols=100000, repeats=3, lambdas=_NLC_LAMBDAS,
                  input_mapping=InputMapping.POWER_LINEAR)
  assert experiments.run_benchmark(cfg).metrics.median <= 1e-4
  assert experiments.run_benchmark(replace(cfg, snr_db=28.0)).metrics.median <= 1e-3


@pytest.mark.slow
def test_mixing_beats_perceptron_on_iris(iris_dir):
  cfg = RunConfig(task='iris', d=2, lambdas=[1e-7], data_dir=str(iris_dir))
  comb = experiments.run_benchmark(cfg).metrics.median
  perceptron = experiments.perceptron_baseline(cfg).metrics.median
  assert perceptron < comb


@pytest.mark.slow
@pytest.mark.skipif(not _banknote_present(), reason='banknote data not installed')
def test_banknote_sweep_has_sharp_drops():
  m1_values = [round(4.0 + 0.2 * i, 10) for i in range(31)]
  grid = SweepGrid(m1_values=m1_values, repeats_per_cell=5)
  result = experiments.run_sweep(RunConfig(task='banknote', lambdas=[1e-5]), grid)
  medians = dict(zip(m1_values, result.surface(1)[:, 0]))
  plateau = np.median([v for m1, v in medians.items() if 6.2 <= m1 <= 7.8])
  for center in (5.3, 8.6):
    dip = min(v for m1, v in medians.items() if abs(m1 - center) <= 0.45)
    assert dip <= plateau - 0.02
