"""Exception types shared across the toolkit.

Every domain error raised by this package derives from ToolkitError so
callers (and the CLI) can map failures to exit codes in one place. The
class name is the error type surfaced to users; messages carry the
offending path / tag / field where one exists.
"""


class ToolkitError(Exception):
    """Base class for all domain errors raised by synthct_eval."""


class MalformedInput(ToolkitError):
    """A file or payload violates its declared format."""


class UnsupportedEncoding(ToolkitError):
    """A DICOM transfer syntax outside the supported subset."""


class InvalidParameter(ToolkitError):
    """An argument violates an operation's precondition."""


class InsufficientSamples(ToolkitError):
    """Too few samples to fit the requested statistic."""


class NotPositiveSemidefinite(ToolkitError):
    """A matrix expected to be PSD has a significantly negative eigenvalue."""


class DegenerateDistribution(ToolkitError):
    """A distribution has no variance, so a correlation is undefined."""


class DegenerateBaseline(ToolkitError):
    """A baseline entry is non-positive and cannot normalize scores."""


class DegenerateTable(ToolkitError):
    """A contingency table has an empty row, column, or expected cell."""


class MissingFeature(ToolkitError):
    """A slice required for FID has no row in the feature matrix."""


class IoError(ToolkitError):
    """A filesystem read or write failed."""
