"""
Error hierarchy shared by all modules
Every error carries the process exit code the CLI maps it to
"""

from typing import Any, Dict, Optional


EXIT_OK = 0
EXIT_CONFIG_ERROR = 2
EXIT_STAGE_FAILURE = 3


class UqtabError(Exception):
    """Base class for all toolkit errors"""

    exit_code: int = EXIT_STAGE_FAILURE


# ===== data =====

class MissingColumn(UqtabError):
    """A schema column is absent from the CSV header"""

    def __init__(self, column: str):
        self.column = column
        super().__init__(f"Missing column: {column}")


class UnknownLevel(UqtabError):
    """A category level that the schema does not declare"""

    def __init__(self, row: int, column: str, value: str):
        self.row = row
        self.column = column
        self.value = value
        super().__init__(f"Unknown level {value!r} in column {column!r} at row {row}")


class MissingValue(UqtabError):
    """An empty cell; imputation is not supported"""

    def __init__(self, row: int, column: str):
        self.row = row
        self.column = column
        super().__init__(f"Missing value in column {column!r} at row {row}")


class EmptyFile(UqtabError):
    """CSV without data rows"""


class ClassTooSmall(UqtabError):
    """A class has too few members for the requested partitioning"""


# ===== resample =====

class TooFewMinority(UqtabError):
    """SMOTE needs more minority rows than neighbors"""


# ===== models =====

class SingularFit(UqtabError):
    """Fitting hit a degenerate system it cannot recover from"""


class NonConvergence(UqtabError):
    """
    Iterative fit left the finite region
    The last finite state is kept in `partial`
    """

    def __init__(self, family: str, iterations: int, partial: Any = None):
        self.family = family
        self.iterations = iterations
        self.partial = partial
        super().__init__(f"{family} did not converge after {iterations} iterations")


class FeatureMismatch(UqtabError):
    """Prediction matrix columns differ from the fitted feature names"""


class LengthMismatch(UqtabError):
    """Paired vectors of different length"""


# ===== boruta =====

class EmptySelection(UqtabError):
    """No feature was confirmed"""


# ===== bayes =====

class DimMismatch(UqtabError):
    """Input dimension does not match the network"""


class NonFinite(UqtabError):
    """A log density or gradient term evaluated to NaN or infinity"""


class AllDivergent(UqtabError):
    """More than half of the post-warmup transitions diverged"""

    def __init__(self, message: str, diagnostics: Optional[Dict[str, Any]] = None):
        self.diagnostics = diagnostics or {}
        super().__init__(message)


# ===== explain =====

class TooManyFeatures(UqtabError):
    """Exact coalition enumeration is limited to 20 features"""

    def __init__(self, d: int):
        self.d = d
        super().__init__(f"Exact Shapley enumeration supports at most 20 features, got {d}")


class NonFiniteModelOutput(UqtabError):
    """The explained model returned NaN or infinity"""


# ===== cli =====

class ConfigInvalid(UqtabError):
    """Run configuration failed validation"""

    exit_code = EXIT_CONFIG_ERROR


class StageDependencyMissing(UqtabError):
    """A stage needs outputs of a stage that has not run"""


class StageFailure(UqtabError):
    """Wraps any error raised inside a pipeline stage"""

    def __init__(self, stage: str, cause: BaseException):
        self.stage = stage
        self.cause = cause
        super().__init__(f"Stage '{stage}' failed: {cause}")
