from typing import Optional


class SwipeGuardError(Exception):
    exit_code = 1


class ValidationError(SwipeGuardError):
    exit_code = 2


class DataError(SwipeGuardError):
    exit_code = 3


class ConvergenceError(SwipeGuardError):
    exit_code = 4


# validation

class ZeroScreen(ValidationError):
    pass


class ModeMismatch(ValidationError):
    pass


class ShapeMismatch(ValidationError):
    pass


class ConfigContradiction(ValidationError):
    pass


class KExceedsTrainingSize(ValidationError):
    pass


class VersionMismatch(ValidationError):
    pass


class MalformedRequest(ValidationError):
    pass


class PriorUnfit(ValidationError):
    pass


class UntrainedModel(ValidationError):
    pass


class StaleCache(ValidationError):
    pass


class NonPositiveDuration(ValidationError):
    pass


# data

class MissingPath(DataError):
    pass


class EmptyCorpus(DataError):
    pass


class SchemaViolation(DataError):
    def __init__(self, message: str, path: Optional[str] = None, line: Optional[int] = None):
        where = ''
        if path is not None:
            where = f'{path}:{line}: ' if line is not None else f'{path}: '
        super().__init__(f'{where}{message}')
        self.path = path
        self.line = line


class DegenerateTrace(DataError):
    pass


class EmptyTrace(DataError):
    pass


class ZeroDistance(DataError):
    pass


class NonFiniteFeature(DataError):
    pass


class NonFiniteInput(DataError):
    pass


class EmptyTrainingSet(DataError):
    pass


class SingleClassTrainingSet(DataError):
    pass


class SingleClassEvalSet(DataError):
    def __init__(self, message: str, metrics=None):
        super().__init__(message)
        self.metrics = metrics


class InsufficientSamples(DataError):
    pass


class InsufficientData(DataError):
    pass


class CorruptBundle(DataError):
    pass


# convergence

class SmoNonConvergence(ConvergenceError):
    def __init__(self, message: str, iterations: int = 0, kkt_gap: float = float('nan')):
        super().__init__(f'{message} (iterations={iterations}, kkt_gap={kkt_gap:.3g})')
        self.iterations = iterations
        self.kkt_gap = kkt_gap


class NonFiniteLoss(ConvergenceError):
    def __init__(self, message: str, epoch: int, batch: int):
        super().__init__(f'{message} (epoch {epoch}, batch {batch})')
        self.epoch = epoch
        self.batch = batch
