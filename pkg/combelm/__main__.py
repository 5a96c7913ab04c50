import argparse
import json
import logging
import os
from pathlib import Path
import sys
from typing import List, Optional

import numpy as np

from . import experiments, optics, records, tasks
from .config import TASKS, CliConfig, RunConfig, load_config_file, resolve
from .error import ConfigError, Error

EXIT_OK = 0
EXIT_FAILURE = 1
EXIT_USAGE = 2

_LOG_LEVELS = ('CRITICAL', 'ERROR', 'WARNING', 'INFO', 'DEBUG')


def _number_list(text: str) -> List[float]:
  """Comma list ('1,2.5,4') or inclusive range ('start:stop:step')."""
  try:
    if ':' in text:
      start, stop, step = (float(part) for part in text.split(':'))
      if step <= 0 or stop < start:
        raise ValueError
      count = int(np.floor(round((stop - start) / step, 9))) + 1
      return [round(start + i * step, 12) for i in range(count)]
    return [float(part) for part in text.split(',') if part.strip()]
  except ValueError:
    raise argparse.ArgumentTypeError('expected a comma list or start:stop:step, got {!r}'.format(text))


def _int_list(text: str) -> List[int]:
  values = _number_list(text)
  if any(value != int(value) for value in values):
    raise argparse.ArgumentTypeError('expected integers, got {!r}'.format(text))
  return [int(value) for value in values]


def _add_run_options(parser: argparse.ArgumentParser):
  group_task = parser.add_argument_group('Task', 'Benchmark task and data')
  group_task.add_argument('--snr', dest='snr_db', type=float, help='NLC channel SNR in dB.')
  group_task.add_argument('--symbols', dest='n_symbols', type=int, help='NLC sequence length.')
  group_task.add_argument('--snr_reference', choices=('post', 'pre'), help='NLC noise reference.')
  group_task.add_argument('--banknote_features', type=int, choices=(4, 5))
  group_task.add_argument('--data_dir', help='Dataset directory.')

  group_optics = parser.add_argument_group('Optics', 'Modulators and encoding')
  group_optics.add_argument('--epsilon', type=float, help='Second-harmonic ratio of PM1.')
  group_optics.add_argument('--phi', type=float, help='Second-harmonic phase of PM1 (rad).')
  group_optics.add_argument('--tol', dest='truncation_tol', type=float, help='Line cut-off.')
  group_optics.add_argument('--input_mapping', choices=('db-linear', 'power-linear'),
                            help='Feature to attenuation mapping.')
  group_optics.add_argument('--layout', choices=('consecutive', 'interleaved'))
  group_optics.add_argument('--placement', choices=('central', 'strongest'))

  group_training = parser.add_argument_group('Training', 'Readout training and evaluation')
  group_training.add_argument('--lambda', dest='lambdas', type=_number_list,
                              help='Ridge regularization grid.')
  group_training.add_argument('--mode', choices=('digital', 'optical'))
  group_training.add_argument('--mapping', choices=('db-linear', 'power-linear'))
  group_training.add_argument('--c_source', choices=('learned', 'from-weights'))
  group_training.add_argument('--dark_noise', dest='dark_noise_sigma', type=float)
  group_training.add_argument('--train_fraction', type=float)
  group_training.add_argument('--repeats', type=int, help='Random splits.')
  group_training.add_argument('--seed', type=int, help='Master seed.')
  group_training.add_argument('--threads', type=int, help='Worker threads.')


def _add_task(parser: argparse.ArgumentParser):
  parser.add_argument('task', nargs='?', choices=TASKS, help='Benchmark task.')


def _add_single_point(parser: argparse.ArgumentParser):
  parser.add_argument('--d', type=int, help='Replication factor.')
  parser.add_argument('--m1', type=float, help='Modulation index of PM1.')
  parser.add_argument('--m2', type=float, help='Modulation index of PM2.')


def ParseArguments(argv: Optional[List[str]] = None) -> argparse.Namespace:
  """Parse command line arguments."""
  common = argparse.ArgumentParser(add_help=False)
  common.add_argument('--config', default=None, help='JSON config file.')
  common.add_argument('--out', default='.', help='Output directory.')
  common.add_argument('--log_level', default=None, choices=_LOG_LEVELS, help='Minimal log level.')
  common.add_argument('-v', '--verbose', action='count', default=0,
                      help='INFO with -v, DEBUG with -vv.')

  arg_parser = argparse.ArgumentParser(prog='combelm',
                                       description='Frequency-comb extreme learning machine.',
                                       allow_abbrev=False)
  subparsers = arg_parser.add_subparsers(dest='cmd', help='Determines what to compute')
  subparsers.required = True

  parser_run = subparsers.add_parser('run', parents=[common], help='Benchmarks one configuration')
  _add_task(parser_run)
  _add_single_point(parser_run)
  _add_run_options(parser_run)
  parser_run.add_argument('--keep_predictions', action='store_true',
                          help='Also write the per-sample decisions.')
  parser_run.add_argument('--export_sequence', action='store_true',
                          help='Also write the NLC channel sequence (t, u, x).')

  parser_sweep = subparsers.add_parser('sweep', parents=[common], help='Sweeps d, m1 and m2')
  _add_task(parser_sweep)
  parser_sweep.add_argument('--d', dest='d_values', type=_int_list)
  parser_sweep.add_argument('--m1', dest='m1_values', type=_number_list)
  parser_sweep.add_argument('--m2', dest='m2_values', type=_number_list)
  parser_sweep.add_argument('--cell_repeats', dest='repeats_per_cell', type=int)
  parser_sweep.add_argument('--max_cells', type=int)
  _add_run_options(parser_sweep)

  parser_comb = subparsers.add_parser('export-comb', parents=[common],
                                      help='Writes the spectrum of the PM1 comb')
  _add_single_point(parser_comb)
  _add_run_options(parser_comb)
  parser_comb.add_argument('--hidden', action='store_true',
                           help='Spectrum after PM2 with every line at 0 dB.')

  parser_validate = subparsers.add_parser('validate-data', parents=[common],
                                          help='Checks the dataset files')
  parser_validate.add_argument('--data_dir', help='Dataset directory.')
  parser_fetch = subparsers.add_parser('fetch-data', parents=[common],
                                       help='Copies the packaged Iris and Wine files')
  parser_fetch.add_argument('--data_dir', help='Dataset directory.')

  parser_snr = subparsers.add_parser('snr-scan', parents=[common],
                                     help='NLC symbol error rate across SNR values')
  _add_single_point(parser_snr)
  _add_run_options(parser_snr)
  parser_snr.add_argument('--snr_values', type=_number_list, default=None,
                          help='SNR values in dB.')
  parser_snr.add_argument('--perceptron', action='store_true', help='Scan the linear baseline.')

  parser_baseline = subparsers.add_parser('baseline', parents=[common], help='Runs a baseline')
  parser_baseline.add_argument('kind', choices=('perceptron', 'svm'))
  _add_task(parser_baseline)
  _add_single_point(parser_baseline)
  _add_run_options(parser_baseline)
  return arg_parser.parse_args(argv)


def setup_logger(log_level):
  logging_handler = logging.StreamHandler(sys.stderr)
  logging_handler.setFormatter(
      logging.Formatter(fmt='{levelname[0]}{asctime}.{msecs:03.0f}  '
                        '{filename}:{lineno}] {message}',
                        datefmt='%m%d %H:%M:%S',
                        style='{'))
  logger = logging.getLogger()
  logger.setLevel(log_level)
  for handler in list(logger.handlers):
    if getattr(handler, '_combelm', False):
      logger.removeHandler(handler)
  logging_handler._combelm = True
  logger.addHandler(logging_handler)


_NOT_OVERRIDES = {'cmd', 'config', 'out', 'log_level', 'verbose', 'keep_predictions', 'hidden',
                  'snr_values', 'perceptron', 'kind', 'export_sequence'}


def _cli_config(parsed_args: argparse.Namespace) -> CliConfig:
  if parsed_args.log_level:
    verbosity = parsed_args.log_level
  else:
    verbosity = ('WARNING', 'INFO', 'DEBUG')[min(parsed_args.verbose, 2)]
  overrides = {
      key: value for key, value in vars(parsed_args).items() if key not in _NOT_OVERRIDES
  }
  return CliConfig(parsed_args.cmd, parsed_args.config, parsed_args.out, overrides, verbosity)


def _print(content):
  print(json.dumps(content, indent=2, sort_keys=True))


def _file_stem(cfg: RunConfig) -> str:
  return '{}_{}'.format(cfg.task, cfg.mode.value)


def run(parsed_args, cli: CliConfig) -> int:
  file_values = load_config_file(cli.config_path) if cli.config_path else {}
  if cli.subcommand == 'snr-scan':
    cli.overrides['task'] = 'nlc'
  cfg, grid = resolve(file_values, cli.overrides)
  out = Path(cli.out_dir)
  if cli.subcommand == 'run':
    if parsed_args.export_sequence and cfg.task != 'nlc':
      raise ConfigError('--export_sequence needs the nlc task, got {}.'.format(cfg.task))
    result = experiments.run_benchmark(cfg, keep_predictions=parsed_args.keep_predictions)
    records.write_benchmark(out / (_file_stem(cfg) + '.tsv'), result, cfg)
    if parsed_args.keep_predictions:
      records.write_predictions(out / (_file_stem(cfg) + '_predictions.tsv'), result, cfg)
    if parsed_args.export_sequence:
      tasks.nlc_write_sequence(experiments.load_task(cfg), out / 'nlc_sequence.tsv')
    _print({'task': result.task, 'selected_lambda': result.selected_lambda,
            **{k: v for k, v in result.metrics.to_dict(encode_json=True).items() if k != 'scores'}})
  elif cli.subcommand == 'sweep':
    result = experiments.run_sweep(cfg, grid)
    records.write_sweep(out / (_file_stem(cfg) + '_sweep.tsv'), result, cfg, grid)
    records.write_sweep_grids(out / (_file_stem(cfg) + '_sweep'), result, cfg, grid)
    failed = sum(1 for cell in result.cells if cell.error)
    _print({'task': result.task, 'cells': len(result.cells), 'failed': failed})
  elif cli.subcommand == 'export-comb':
    comb = optics.generate_comb(1.0, cfg.pm1())
    if parsed_args.hidden:
      comb = optics.phase_modulate(comb, cfg.pm2())
    path = records.write_comb(out / ('comb_hidden.tsv' if parsed_args.hidden else 'comb.tsv'),
                              comb, cfg)
    _print({'file': str(path), 'lines': int(comb.amplitudes.size), 'k_min': comb.k_min,
            'k_max': comb.k_max})
  elif cli.subcommand == 'snr-scan':
    values = parsed_args.snr_values or experiments.DEFAULT_SNR_VALUES
    results = experiments.snr_scan(cfg, values, baseline=parsed_args.perceptron)
    records.write_snr_scan(out / 'nlc_snr_scan.tsv', results, cfg)
    _print([{'snr_db': snr, 'ser': result.metrics.median} for snr, result in results])
  elif cli.subcommand == 'baseline':
    if parsed_args.kind == 'svm':
      result = experiments.svm_baseline(cfg)
    else:
      result = experiments.perceptron_baseline(cfg)
    records.write_benchmark(out / '{}_{}.tsv'.format(cfg.task, parsed_args.kind), result, cfg,
                            baseline=parsed_args.kind)
    _print({'task': result.task, 'baseline': parsed_args.kind, 'median': result.metrics.median})
  return EXIT_OK


def data(parsed_args) -> int:
  if parsed_args.cmd == 'fetch-data':
    for schema in (tasks.TabularSchema.IRIS, tasks.TabularSchema.WINE):
      print(tasks.materialize_dataset(schema, parsed_args.data_dir))
    return EXIT_OK
  statuses = tasks.validate_datasets(parsed_args.data_dir)
  for status in statuses:
    print('{:<40} {:>5} rows  {}'.format(str(status.path), status.rows, status.message))
  banknote_missing = lambda s: s.schema is tasks.TabularSchema.BANKNOTE and not s.present
  failed = [s for s in statuses if not s.ok and not banknote_missing(s)]
  return EXIT_FAILURE if failed else EXIT_OK


def main(argv: Optional[List[str]] = None) -> int:
  parsed_args = ParseArguments(argv)  # type: argparse.Namespace
  cli = _cli_config(parsed_args)
  setup_logger(cli.verbosity)
  try:
    if parsed_args.cmd in ('fetch-data', 'validate-data'):
      return data(parsed_args)
    os.makedirs(cli.out_dir, exist_ok=True)
    return run(parsed_args, cli)
  except ConfigError as e:
    logging.error('Invalid configuration: %s', e)
    print('error: {}'.format(e), file=sys.stderr)
    return EXIT_USAGE
  except Error as e:
    logging.error('Failed: %s', e)
    print('error: {}'.format(e), file=sys.stderr)
    return EXIT_FAILURE


if __name__ == '__main__':
  sys.exit(main())
