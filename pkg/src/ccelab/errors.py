"""Exception hierarchy.

Every error carries a short machine-readable ``category`` that the CLI
prints on failure.
"""


class CCELabError(Exception):
    category = "error"


class InvalidInputError(CCELabError, ValueError):
    category = "invalid-input"


class InvalidShapeError(InvalidInputError):
    category = "invalid-shape"


class InvalidLabelError(InvalidInputError):
    category = "invalid-label"


class EmptyInputError(InvalidInputError):
    category = "empty-input"


class ConfigurationError(CCELabError, ValueError):
    category = "configuration"


class InfeasibleRatioError(ConfigurationError):
    category = "infeasible-ratio"


class InsufficientSamplesError(InvalidInputError):
    category = "insufficient-samples"


class FormatError(CCELabError, ValueError):
    category = "format"


class ConsistencyError(FormatError):
    category = "consistency"


class ParseError(FormatError):
    category = "parse"


class StateError(CCELabError, RuntimeError):
    category = "state"


class NumericError(CCELabError, FloatingPointError):
    category = "numeric"


class TrainingDiverged(NumericError):
    """Raised when a loss or gradient becomes non-finite mid-run.

    ``partial`` holds the RunResult accumulated up to the failing epoch.
    """

    category = "divergence"

    def __init__(self, message, partial=None):
        super().__init__(message)
        self.partial = partial


class InvalidIndexError(InvalidInputError, IndexError):
    category = "invalid-index"


class InvalidDistributionError(InvalidInputError):
    category = "invalid-distribution"
