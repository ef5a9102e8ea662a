"""Exception types raised by the package.

All subclass ValueError so callers that don't care about the distinction
can catch one thing; the concrete types exist because the contracts (and
tests) distinguish bad file formats from bad call arguments.
"""


class IdxFormatError(ValueError):
    """IDX file violates the format (magic number, truncation)."""


class ConsistencyError(ValueError):
    """Two inputs that must agree (e.g. image/label counts) do not."""


class DivisibilityError(ValueError):
    """Round count does not divide the per-client dataset size."""


class CapacityError(ValueError):
    """Sample pool too small for the requested client/dataset layout."""


class DimensionError(ValueError):
    """Vector or matrix dimensions do not line up."""


class ParameterError(ValueError):
    """Scalar parameter outside its documented domain."""


class ConfigError(ValueError):
    """Config file cannot be parsed or contains unknown/invalid keys."""


class SchemaError(ValueError):
    """CSV header or row arity does not match the sweep schema."""
