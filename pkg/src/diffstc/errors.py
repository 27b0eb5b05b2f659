"""Exception hierarchy shared by all modules.

Every error raised on purpose by the library derives from
:class:`DiffStcError`, so callers (notably the CLI) can map error
categories to exit codes without string matching.
"""


class DiffStcError(Exception):
    """Base class for all library errors."""

    category = "error"


class ShapeError(DiffStcError, ValueError):
    """Matrix or vector dimensions are incompatible."""

    category = "shape"


class ParameterError(DiffStcError, ValueError):
    """A parameter value is outside its valid range."""

    category = "parameter"


class CapacityError(DiffStcError):
    """An exhaustive search would exceed its configured guard."""

    category = "capacity"


class UnsupportedError(DiffStcError):
    """The requested combination of scheme, metric or channel is not supported."""

    category = "unsupported"


class ContractError(DiffStcError, ValueError):
    """An input violates a structural precondition (e.g. not Hermitian)."""

    category = "contract"


class SingularityError(DiffStcError, ArithmeticError):
    """A matrix is singular or too ill-conditioned to invert."""

    category = "singular"


class DegenerateBlockError(DiffStcError, ArithmeticError):
    """A differential block has zero amplitude and cannot serve as reference."""

    category = "degenerate"


class ConfigError(DiffStcError, ValueError):
    """An experiment configuration is malformed or inconsistent."""

    category = "config"
