from dataclasses import replace
import json
from pathlib import Path

import pytest

from combelm import records
from combelm.config import (CSource, RunConfig, SweepGrid, WeightingMode, config_hash,
                            load_config_file, resolve, with_cell)
from combelm.elm import InputMapping, WeightMapping
from combelm.error import ConfigError
from combelm.tasks import SnrReference

OPTIONS = Path(__file__).resolve().parent.parent / 'options.json'


def _write(tmp_path, content) -> str:
  path = tmp_path / 'config.json'
  path.write_text(json.dumps(content))
  return str(path)


def test_defaults():
  cfg = RunConfig().validate()
  assert (cfg.m1, cfg.m2, cfg.epsilon, cfg.phi) == (7.87, 2.18, 0.0471, 1.31)
  assert cfg.lambdas == [1e-7]
  assert cfg.mode is WeightingMode.DIGITAL
  assert cfg.mapping is WeightMapping.DB_LINEAR
  assert cfg.snr_reference is SnrReference.POST_NONLINEARITY
  assert cfg.pm2().epsilon == 0.0


def test_shipped_options_file():
  cfg, grid = resolve(load_config_file(str(OPTIONS)), {})
  assert cfg.task == 'iris'
  assert cfg.threads == 4
  assert cfg.c_source is CSource.LEARNED
  assert len(grid.m1_values) == len(grid.m2_values) == 11
  assert grid.axes(cfg)[0] == [1]


def test_sections_are_flattened(tmp_path):
  path = _write(tmp_path, {'optics': {'m1': 5.0}, 'run': {'seed': 3}, 'sweep': {'max_cells': 9}})
  assert load_config_file(path) == {'m1': 5.0, 'seed': 3, 'max_cells': 9}


@pytest.mark.parametrize('content', [
    {'lasers': {'m1': 5.0}},
    {'optics': {'m3': 1.0}},
    {'optics': [1, 2]},
    [1, 2],
])
def test_config_file_rejects(tmp_path, content):
  with pytest.raises(ConfigError):
    load_config_file(_write(tmp_path, content))


def test_config_file_rejects_bad_json(tmp_path):
  path = tmp_path / 'broken.json'
  path.write_text('{"optics": ')
  with pytest.raises(ConfigError):
    load_config_file(str(path))


def test_overrides_take_precedence():
  cfg, grid = resolve({'seed': 3, 'm1': 5.0, 'repeats_per_cell': 4},
                      {'seed': 9, 'm1': None, 'mode': 'optical'})
  assert cfg.seed == 9
  assert cfg.m1 == 5.0
  assert cfg.mode is WeightingMode.OPTICAL
  assert cfg.n_repeats == 10
  assert grid.repeats_per_cell == 4


@pytest.mark.parametrize('values', [
    {'lambdas': [-1.0]},
    {'lambdas': []},
    {'task': 'mnist'},
    {'m1': 12.5},
    {'d': 0},
    {'train_fraction': 1.0},
    {'c_fraction': 0.0},
    {'threads': 0},
    {'dark_noise_sigma': -0.1},
    {'task': 'nlc', 'n_symbols': 10},
    {'colour': 'red'},
])
def test_resolve_rejects(values):
  with pytest.raises(ConfigError):
    resolve({}, values)


def test_config_hash():
  cfg = RunConfig(seed=1)
  assert config_hash(cfg) == config_hash(RunConfig(seed=1))
  assert len(config_hash(cfg)) == 64
  assert config_hash(cfg) != config_hash(replace(cfg, seed=2))
  assert config_hash(cfg) != config_hash(cfg, SweepGrid())


def test_with_cell():
  cell = with_cell(RunConfig(threads=8, repeats=100), 2, 3.0, 1.5, 20)
  assert (cell.d, cell.m1, cell.m2, cell.repeats, cell.threads) == (2, 3.0, 1.5, 20, 1)


def test_grid_axes_default_to_run_values():
  cfg = RunConfig(d=2, m1=3.0, m2=1.0)
  assert SweepGrid().axes(cfg) == ([2], [3.0], [1.0])
  assert SweepGrid(m1_values=[1.0, 2.0]).axes(cfg) == ([2], [1.0, 2.0], [1.0])


def test_records_round_trip(tmp_path):
  path = records.write_records(tmp_path / 'out' / 'table.tsv', 'test', {'seed': 4}, ('a', 'b'),
                               [(1, 0.5), (2, None), (3, 'x\ty')])
  header, columns, rows = records.read_records(path)
  assert header['format'] == records.FORMAT
  assert header['kind'] == 'test'
  assert header['seed'] == 4
  assert columns == ['a', 'b']
  assert rows == [['1', '0.5'], ['2', ''], ['3', 'x y']]
  meta = json.loads(Path(str(path) + records.META_SUFFIX).read_text())
  assert meta['file'] == 'table.tsv'


def test_records_without_header(tmp_path):
  path = tmp_path / 'plain.tsv'
  path.write_text('a\tb\n')
  with pytest.raises(ValueError):
    records.read_records(path)


def test_config_from_records_file(tmp_path):
  cfg = RunConfig(task='nlc', n_symbols=300, snr_db=20.0, seed=5)
  grid = SweepGrid(m1_values=[6.0, 7.0])
  path = records.write_records(tmp_path / 'run.tsv', 'test', records._run_header(cfg, grid),
                               ('a',), [(1,)])
  loaded, loaded_grid = resolve(load_config_file(str(path)), {})
  assert loaded == cfg
  assert loaded_grid == grid
  assert config_hash(loaded, loaded_grid) == config_hash(cfg, grid)


def test_records_file_without_config(tmp_path):
  path = records.write_records(tmp_path / 'bare.tsv', 'test', {'seed': 1}, ('a',), [(1,)])
  with pytest.raises(ConfigError):
    load_config_file(str(path))


def test_input_mapping_reaches_preprocessing():
  cfg, _ = resolve({'input_mapping': 'db-linear'}, {'input_mapping': 'power-linear'})
  assert cfg.input_mapping is InputMapping.POWER_LINEAR
  assert cfg.preprocess_config().input_mapping is InputMapping.POWER_LINEAR
