"""
Exception hierarchy shared by every composer module.

Each error carries the process exit code the CLI maps it to.
"""


class ComposerError(Exception):
    exit_code = 1


class DataError(ComposerError, ValueError):
    """Invalid input data, configuration or state"""
    exit_code = 2


class ConfigError(DataError):
    pass


class InvalidKError(DataError):
    pass


class InvalidDomainSetError(DataError):
    pass


class DimensionMismatchError(DataError):
    def __init__(self, expected: int, got: int, what: str = 'vector'):
        super().__init__(f"{what} has {got} entries, expected {expected}")
        self.expected = expected
        self.got = got


class AllZeroError(DataError):
    pass


class NotNormalizedError(DataError):
    pass


class NegativeWeightError(DataError):
    pass


class NonFiniteError(DataError):
    pass


class EmptyInputError(DataError):
    pass


class NonPositiveLossError(DataError):
    pass


class NonConsecutiveStepsError(DataError):
    pass


class EmptyEpochsError(DataError):
    pass


class StepOrderViolationError(DataError):
    def __init__(self, expected: int, got: int, reason: str | None = None):
        super().__init__(reason or f"feedback step {got} does not follow state; expected step {expected}")
        self.expected = expected
        self.got = got


class FeedbackExhaustedError(DataError):
    pass


class InvalidBudgetError(DataError):
    pass


class MissingPoolError(DataError):
    pass


class EmptyPoolError(DataError):
    pass


class PoolSizeMismatchError(DataError):
    pass


class CorruptStateError(DataError):
    pass


class MalformedRecordError(DataError):
    def __init__(self, path, line_no: int, reason: str):
        super().__init__(f"{path}:{line_no}: {reason}")
        self.path = path
        self.line_no = line_no


class ClassifierOutputError(DataError):
    """Classifier reply could not be turned into a Distribution"""


class NoJsonFoundError(ClassifierOutputError):
    pass


class MissingKeyError(ClassifierOutputError):
    def __init__(self, name: str):
        super().__init__(f"classifier output is missing key {name!r}")
        self.name = name


class UnexpectedKeyError(ClassifierOutputError):
    pass


class NonNumericValueError(ClassifierOutputError):
    pass


class SumOutOfToleranceError(ClassifierOutputError):
    pass


class ServiceError(ComposerError):
    """External classifier endpoint failures"""
    exit_code = 3


class EndpointUnreachableError(ServiceError):
    pass


class TooManyDroppedError(ServiceError):
    def __init__(self, dropped: int, attempted: int, limit: float):
        super().__init__(f"{dropped} of {attempted} samples dropped (limit {limit:.0%})")
        self.dropped = dropped
        self.attempted = attempted
