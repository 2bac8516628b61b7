"""Exception hierarchy for the benchmark harness.

Every error raised on purpose by this package derives from CdbenchError so
callers (and the CLI) can map error classes to exit codes.
"""


class CdbenchError(Exception):
    """Base class for all harness errors."""


class LoadError(CdbenchError):
    """A dataset bundle is missing or a bundle file cannot be read."""


class ShapeError(CdbenchError):
    """Array dimensions disagree with the declared node/feature counts."""


class ValidationError(CdbenchError):
    """An input violates a structural invariant (ids, weights, labels)."""


class SplitError(CdbenchError):
    """The graph is too small to give every node split at least one node."""


class UndefinedInputError(CdbenchError):
    """A statistic was requested on an input for which it is undefined
    (empty graph, single-algorithm rank matrix, empty test suite)."""


class UnsupportedMetricError(CdbenchError):
    """A supervised metric was requested without ground-truth labels."""


class BudgetError(CdbenchError):
    """The hyperparameter trial budget is exhausted."""


class ConfigError(CdbenchError):
    """A configuration value is out of range or a config file is malformed."""


class SelectionError(CdbenchError):
    """Best-trial selection was requested on a study with no complete trials."""


class AlignmentError(CdbenchError):
    """Two results cubes do not share the same algorithm/seed/test axes."""


class StoreParseError(CdbenchError):
    """A stored cube file is corrupt; message carries the byte offset."""


class StoreVersionError(CdbenchError):
    """A stored cube file uses an unsupported format version."""


class ProtocolError(CdbenchError):
    """A runner violated the wire protocol."""
