"""Exception hierarchy shared across the package.

The CLI maps these onto process exit codes: usage problems exit 2, data and
contract violations exit 3, anything unexpected exits 4.
"""


class AgriQRSError(Exception):
    """Base class for all errors raised by this package."""

    exit_code = 4


class UsageError(AgriQRSError):
    """Bad command-line arguments or flag combinations."""

    exit_code = 2


class DataError(AgriQRSError):
    """Input data or configuration violates a documented contract."""

    exit_code = 3


class ConfigurationError(DataError):
    """A config value is missing, malformed, or out of range."""


class IngestionError(DataError):
    """The corpus file cannot be parsed into records."""


class FitError(DataError):
    """The pipeline cannot be fit on the given corpus."""


class ArtifactError(DataError):
    """A saved pipeline directory is missing files or inconsistent."""


class EmbeddingError(DataError):
    """An embedding provider returned unusable output or failed outright."""


class QueryError(DataError):
    """A user query is unusable (empty after preprocessing)."""


class UnsupportedQueryError(QueryError):
    """A user query asks for realtime information this engine does not serve."""
