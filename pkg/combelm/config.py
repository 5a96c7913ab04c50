from dataclasses import dataclass, field, fields, replace
from dataclasses_json import dataclass_json
import enum
import hashlib
import json
from typing import Any, Dict, List, Optional

from .elm import FeatureLayout, InputMapping, Placement, PreprocessConfig, WeightMapping
from .error import ConfigError
from .optics import ModulatorConfig
from .tasks import NlcConfig, SnrReference, SplitPlan

TASKS = ('iris', 'wine', 'banknote', 'nlc')

# Config file sections; each is a flat key/value map.
CONFIG_SECTIONS = ('optics', 'encoding', 'training', 'task', 'run', 'sweep')


class WeightingMode(enum.Enum):
  DIGITAL = 'digital'
  OPTICAL = 'optical'


class CSource(enum.Enum):
  LEARNED = 'learned'  # Least squares on the first test-phase acquisitions.
  FROM_WEIGHTS = 'from-weights'


DIGITAL_REPEATS = 100
OPTICAL_REPEATS = 10


@dataclass_json
@dataclass
class RunConfig:
  task: str = 'iris'
  d: int = 1
  m1: float = 7.87
  m2: float = 2.18
  epsilon: float = 0.0471
  phi: float = 1.31
  truncation_tol: float = 1e-12
  lambdas: List[float] = field(default_factory=lambda: [1e-7])
  mode: WeightingMode = WeightingMode.DIGITAL
  mapping: WeightMapping = WeightMapping.DB_LINEAR
  c_source: CSource = CSource.LEARNED
  c_fraction: float = 0.1
  train_fraction: float = 0.7
  repeats: Optional[int] = None  # Mode default when unset.
  seed: int = 0
  dark_noise_sigma: float = 0.0
  snr_db: Optional[float] = None
  n_symbols: int = 1000
  snr_reference: SnrReference = SnrReference.POST_NONLINEARITY
  input_mapping: InputMapping = InputMapping.DB_LINEAR
  layout: FeatureLayout = FeatureLayout.CONSECUTIVE
  placement: Placement = Placement.CENTRAL
  banknote_features: Optional[int] = None
  data_dir: Optional[str] = None
  threads: int = 1

  def validate(self) -> 'RunConfig':
    """Checks every invariant by building the derived configurations."""
    if self.task not in TASKS:
      raise ConfigError('Unknown task {!r}; choose one of {}.'.format(self.task, ', '.join(TASKS)))
    if not self.lambdas:
      raise ConfigError('The lambda grid is empty.')
    if any(not lam >= 0 for lam in self.lambdas):
      raise ConfigError('Lambda values must be non-negative, got {}.'.format(self.lambdas))
    if not 0.0 < self.c_fraction < 1.0:
      raise ConfigError('C training fraction {} outside (0, 1).'.format(self.c_fraction))
    if self.dark_noise_sigma < 0:
      raise ConfigError('Dark noise sigma must be non-negative.')
    if self.threads < 1:
      raise ConfigError('At least one thread is needed.')
    self.pm1()
    self.pm2()
    self.preprocess_config()
    self.split_plan()
    if self.task == 'nlc':
      self.nlc_config()
    return self

  @property
  def n_repeats(self) -> int:
    if self.repeats is not None:
      return self.repeats
    return DIGITAL_REPEATS if self.mode is WeightingMode.DIGITAL else OPTICAL_REPEATS

  def pm1(self) -> ModulatorConfig:
    return ModulatorConfig(self.m1, self.epsilon, self.phi, self.truncation_tol)

  def pm2(self) -> ModulatorConfig:
    return ModulatorConfig(self.m2, 0.0, 0.0, self.truncation_tol)

  def preprocess_config(self) -> PreprocessConfig:
    return PreprocessConfig(d=self.d, layout=self.layout, input_mapping=self.input_mapping)

  def split_plan(self) -> SplitPlan:
    return SplitPlan(self.train_fraction, self.seed, self.n_repeats)

  def nlc_config(self) -> NlcConfig:
    return NlcConfig(self.n_symbols, self.snr_db, self.seed, self.snr_reference)


@dataclass_json
@dataclass
class SweepGrid:
  m1_values: List[float] = field(default_factory=list)
  m2_values: List[float] = field(default_factory=list)
  d_values: List[int] = field(default_factory=list)
  repeats_per_cell: int = 20
  max_cells: int = 2500

  def axes(self, cfg: RunConfig):
    """(d, m1, m2) axes; an empty axis holds the run configuration's value."""
    return (self.d_values or [cfg.d], self.m1_values or [cfg.m1], self.m2_values or [cfg.m2])


@dataclass
class CliConfig:
  subcommand: str
  config_path: Optional[str] = None
  out_dir: str = '.'
  overrides: Dict[str, Any] = field(default_factory=dict)
  verbosity: str = 'WARNING'


_RUN_KEYS = {f.name for f in fields(RunConfig)}
_SWEEP_KEYS = {f.name for f in fields(SweepGrid)}


def _record_values(path: str, header_line: str) -> Dict[str, Any]:
  """Run configuration embedded in the header of a records file."""
  try:
    header = json.loads(header_line[2:])
  except ValueError as e:
    raise ConfigError('Records file {} has a broken header: {}'.format(path, e))
  if not isinstance(header, dict) or not isinstance(header.get('config'), dict):
    raise ConfigError('Records file {} carries no run configuration.'.format(path))
  values = dict(header['config'])
  values.update(header.get('sweep') or {})
  unknown = set(values) - _RUN_KEYS - _SWEEP_KEYS
  if unknown:
    raise ConfigError('Unknown config keys in {}: {}.'.format(path, ', '.join(sorted(unknown))))
  return values


def load_config_file(path: str) -> Dict[str, Any]:
  """Flattens the sections of a JSON config file into one key/value map.

  A records file written by a run is accepted as well; its header holds the
  configuration that produced it.
  """
  with open(path, 'rb') as f:
    first = f.readline()
    if first.startswith(b'# '):
      return _record_values(path, first.decode('utf-8'))
    f.seek(0)
    try:
      content = json.load(f)
    except ValueError as e:
      raise ConfigError('Config file {} is not valid JSON: {}'.format(path, e))
  if not isinstance(content, dict):
    raise ConfigError('Config file {} must hold a JSON object.'.format(path))
  values = {}
  for section, entries in content.items():
    if section not in CONFIG_SECTIONS:
      raise ConfigError('Unknown config section {!r} in {}.'.format(section, path))
    if not isinstance(entries, dict):
      raise ConfigError('Config section {!r} must be a key/value map.'.format(section))
    for key, value in entries.items():
      if key not in _RUN_KEYS | _SWEEP_KEYS:
        raise ConfigError('Unknown config key {!r} in section {!r}.'.format(key, section))
      values[key] = value
  return values


def resolve(file_values: Dict[str, Any], overrides: Dict[str, Any]) -> (RunConfig, SweepGrid):
  """Defaults < config file < overrides; unset (None) overrides are skipped."""
  merged = dict(file_values)
  merged.update({key: value for key, value in overrides.items() if value is not None})
  unknown = set(merged) - _RUN_KEYS - _SWEEP_KEYS
  if unknown:
    raise ConfigError('Unknown config keys: {}.'.format(', '.join(sorted(unknown))))
  try:
    cfg = RunConfig.from_dict({k: v for k, v in merged.items() if k in _RUN_KEYS})
    grid = SweepGrid.from_dict({k: v for k, v in merged.items() if k in _SWEEP_KEYS})
  except (KeyError, TypeError, ValueError) as e:
    raise ConfigError('Invalid configuration value: {!r}'.format(e))
  return cfg.validate(), grid


def canonical_json(value: Dict[str, Any]) -> str:
  return json.dumps(value, sort_keys=True, separators=(',', ':'))


def config_hash(cfg: RunConfig, grid: Optional[SweepGrid] = None) -> str:
  content = {'run': cfg.to_dict(encode_json=True)}
  if grid is not None:
    content['sweep'] = grid.to_dict(encode_json=True)
  return hashlib.sha256(canonical_json(content).encode('utf-8')).hexdigest()


def with_cell(cfg: RunConfig, d: int, m1: float, m2: float, repeats: int) -> RunConfig:
  return replace(cfg, d=d, m1=m1, m2=m2, repeats=repeats, threads=1)
