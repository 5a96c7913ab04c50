"""Result files.

Every record file starts with one '# ' line holding a JSON header (format,
kind, package version, seed, config hash and the full configuration),
followed by a tab-separated table with a column header row. The content is
a pure function of the configuration; the wall-clock timestamp goes to a
'<file>.meta.json' sidecar so reruns compare byte for byte.
"""
import datetime
import json
import logging
from pathlib import Path
import platform
from typing import Any, Dict, List, Optional, Sequence, Tuple, Union

import numpy as np

from . import __version__
from .config import RunConfig, SweepGrid, canonical_json, config_hash
from .experiments import BenchmarkResult, SweepResult
from .optics import CombState, comb_spectrum

FORMAT = 'combelm-records/1'
META_SUFFIX = '.meta.json'

PathLike = Union[str, Path]


def _cell(value: Any) -> str:
  if value is None:
    return ''
  if isinstance(value, (float, np.floating)):
    return repr(float(value))
  return str(value).replace('\t', ' ').replace('\n', ' ')


def write_records(path: PathLike, kind: str, header: Dict[str, Any], columns: Sequence[str],
                  rows: Sequence[Sequence[Any]]) -> Path:
  path = Path(path)
  path.parent.mkdir(parents=True, exist_ok=True)
  content = {'format': FORMAT, 'kind': kind, 'version': __version__}
  content.update(header)
  with open(path, 'w', encoding='utf-8', newline='\n') as f:
    f.write('# ' + canonical_json(content) + '\n')
    f.write('\t'.join(columns) + '\n')
    for row in rows:
      f.write('\t'.join(_cell(value) for value in row) + '\n')
  meta = {
      'file': path.name,
      'written': datetime.datetime.now(datetime.timezone.utc).isoformat(),
      'python': platform.python_version(),
      'numpy': np.__version__,
  }
  with open(str(path) + META_SUFFIX, 'w', encoding='utf-8') as f:
    json.dump(meta, f, indent=2, sort_keys=True)
  logging.info('Wrote %d %s rows to %s.', len(rows), kind, path)
  return path


def read_records(path: PathLike) -> Tuple[Dict[str, Any], List[str], List[List[str]]]:
  """Returns (header, column names, rows of raw strings)."""
  with open(path, encoding='utf-8') as f:
    first = f.readline()
    if not first.startswith('# '):
      raise ValueError('{} has no record header.'.format(path))
    header = json.loads(first[2:])
    columns = f.readline().rstrip('\n').split('\t')
    rows = [line.rstrip('\n').split('\t') for line in f if line.strip()]
  return header, columns, rows


def _run_header(cfg: RunConfig, grid: Optional[SweepGrid] = None) -> Dict[str, Any]:
  header = {
      'seed': cfg.seed,
      'config_hash': config_hash(cfg, grid),
      'config': cfg.to_dict(encode_json=True),
  }
  if grid is not None:
    header['sweep'] = grid.to_dict(encode_json=True)
  return header


def write_benchmark(path: PathLike, result: BenchmarkResult, cfg: RunConfig,
                    baseline: Optional[str] = None) -> Path:
  """Per-repeat scores; the summary metrics and lambda medians go to the header."""
  header = _run_header(cfg)
  header['task'] = result.task
  header['metrics'] = {key: value for key, value in result.metrics.to_dict(
      encode_json=True).items() if key != 'scores'}
  header['selected_lambda'] = result.selected_lambda
  header['lambda_medians'] = [list(pair) for pair in result.lambda_medians]
  if baseline:
    header['baseline'] = baseline
  rows = [(o.repeat_index, o.score) for o in result.outcomes]
  return write_records(path, 'benchmark', header, ('repeat', result.metrics.metric.value), rows)


def write_predictions(path: PathLike, result: BenchmarkResult, cfg: RunConfig) -> Path:
  """One row per scored test sample, for runs kept with predictions."""
  rows = [(o.repeat_index, index, prediction)
          for o in result.outcomes
          for index, prediction in zip(o.test_indices, o.predictions)]
  return write_records(path, 'predictions', _run_header(cfg), ('repeat', 'sample', 'prediction'),
                       rows)


def write_sweep(path: PathLike, result: SweepResult, cfg: RunConfig, grid: SweepGrid) -> Path:
  """Long-form surface: one row per (d, m1, m2) cell."""
  header = _run_header(cfg, grid)
  header['task'] = result.task
  header['repeats_per_cell'] = result.repeats_per_cell
  rows = []
  for cell in result.cells:
    m = cell.metrics
    stats = (m.median, m.q1, m.q3, m.minimum, m.maximum) if m else (None,) * 5
    rows.append((cell.d, cell.m1, cell.m2, *stats, cell.selected_lambda, cell.error))
  columns = ('d', 'm1', 'm2', 'median', 'q1', 'q3', 'min', 'max', 'lambda', 'error')
  return write_records(path, 'sweep', header, columns, rows)


def write_sweep_grids(stem: PathLike, result: SweepResult, cfg: RunConfig,
                      grid: SweepGrid) -> List[Path]:
  """Median surface per d: one row per m1, one column per m2 ({stem}_d{d}.tsv)."""
  stem = Path(stem)
  paths = []
  for d in result.d_values:
    header = _run_header(cfg, grid)
    header.update({'task': result.task, 'd': d, 'repeats_per_cell': result.repeats_per_cell})
    columns = ['m1'] + ['m2={}'.format(m2) for m2 in result.m2_values]
    surface = result.surface(d)
    rows = [(m1, *(None if np.isnan(v) else float(v) for v in surface[i]))
            for i, m1 in enumerate(result.m1_values)]
    path = stem.with_name('{}_d{}.tsv'.format(stem.name, d))
    paths.append(write_records(path, 'sweep-grid', header, columns, rows))
  return paths


def write_comb(path: PathLike, comb: CombState, cfg: RunConfig) -> Path:
  """Line index, power and relative level (dB) of every line of a comb."""
  spectrum = comb_spectrum(comb)
  header = _run_header(cfg)
  header['total_power'] = comb.total_power
  rows = [(int(k), float(power), float(level))
          for (k, level), power in zip(spectrum, comb.powers)]
  return write_records(path, 'comb', header, ('k', 'power', 'level_db'), rows)


def write_snr_scan(path: PathLike, results: Sequence[Tuple[Optional[float], BenchmarkResult]],
                   cfg: RunConfig) -> Path:
  rows = [(snr, r.metrics.median, r.metrics.q1, r.metrics.q3, r.selected_lambda)
          for snr, r in results]
  return write_records(path, 'snr-scan', _run_header(cfg), ('snr_db', 'ser', 'q1', 'q3', 'lambda'),
                       rows)
