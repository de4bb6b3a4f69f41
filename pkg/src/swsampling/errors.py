"""Exception hierarchy.

Everything raised on purpose derives from :class:`SWError`. Errors caused by
bad input data subclass :class:`DataError`; errors caused by an invalid
configuration or parameter choice subclass :class:`ConfigError`. The CLI maps
the two families to exit codes 3 and 2.
"""


class SWError(Exception):
    pass


class DataError(SWError, ValueError):
    pass


class ConfigError(SWError, ValueError):
    pass


class DimensionError(DataError):
    """Operands live in different ambient dimensions."""


class InvalidDimension(ConfigError):
    """Requested dimension is outside the supported range."""


class SizeError(DataError):
    """Lengths disagree or a collection is too small."""


class UnbalancedError(DataError):
    """The two measures do not have the same number of atoms."""


class MappingError(ConfigError):
    """Cube dimension incompatible with the requested sphere mapping."""


class TableExhausted(ConfigError):
    """The Sobol direction-number table has fewer dimensions than requested."""


class SingularConfiguration(DataError):
    """Coincident points make a Riesz energy infinite."""


class BasisTooLarge(ConfigError):
    """Harmonic basis would exceed the configured size cap."""


class DiagramError(DataError):
    """Persistence diagram has points below the diagonal or a wrong shape."""
