class Error(Exception):
  """Error class for simulator failures."""
  pass


class DomainError(Error):
  """Argument outside the numerical operating envelope."""
  pass


class ConfigError(Error):
  """Invalid configuration value."""
  pass


class UnsupportedConfigurationError(ConfigError):
  """Configuration that is valid in principle but not modelled."""
  pass


class CapacityError(Error):
  """More values than the comb window can encode."""
  pass


class RankDeficiencyError(Error):
  """Error class for singular least-squares systems."""

  def __init__(self, rank: int, columns: int, column: int = None):
    self.rank = rank
    self.columns = columns
    self.column = column
    message = 'Rank deficient system: rank {} < {} columns'.format(rank, columns)
    if column is not None:
      message += ' (column {} is linearly dependent)'.format(column)
    super().__init__(message)


class DatasetParseError(Error):
  """Error class for malformed dataset files."""

  def __init__(self, path, line_number: int, message: str):
    self.path = path
    self.line_number = line_number
    self.message = message
    super().__init__('{}:{}: {}'.format(path, line_number, message))


class RepeatFailure(Error):
  """Error class for a failed cross-validation repeat."""

  def __init__(self, repeat_index: int, cause: Exception):
    self.repeat_index = repeat_index
    self.cause = cause
    super().__init__('Repeat {} failed: {!r}'.format(repeat_index, cause))
