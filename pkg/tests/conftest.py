import numpy as np
import pytest

from combelm import elm, tasks


def pytest_addoption(parser):
  parser.addoption('--runslow', action='store_true', default=False,
                   help='Run the benchmark acceptance tests.')


def pytest_configure(config):
  config.addinivalue_line('markers', 'slow: full-size benchmark runs, enabled by --runslow')


def pytest_collection_modifyitems(config, items):
  if config.getoption('--runslow'):
    return
  skip_slow = pytest.mark.skip(reason='needs --runslow')
  for item in items:
    if 'slow' in item.keywords:
      item.add_marker(skip_slow)


@pytest.fixture
def rng():
  return np.random.default_rng(20240611)


@pytest.fixture
def separable_task():
  """Two well separated classes along two features."""
  generator = np.random.default_rng(7)
  first = generator.uniform(0.0, 0.3, size=(20, 2))
  second = generator.uniform(0.7, 1.0, size=(20, 2))
  features = np.vstack([first, second])
  labels = np.repeat([0, 1], 20)
  return elm.TaskDataset('toy', features, np.eye(2)[labels], elm.TaskKind.MULTI_CLASS_ONE_HOT,
                         ('low', 'high'))


@pytest.fixture
def data_dir(tmp_path, monkeypatch):
  """Empty dataset directory, also exported through the environment."""
  path = tmp_path / 'data'
  path.mkdir()
  monkeypatch.setenv(tasks.DATA_DIR_ENV, str(path))
  return path


@pytest.fixture
def iris_dir(data_dir):
  tasks.materialize_dataset(tasks.TabularSchema.IRIS, data_dir)
  return data_dir
