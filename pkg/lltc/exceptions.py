import typing


class LLTCException(Exception):
    """Base exception all other `lltc` exceptions are derived from."""


class InvalidDistribution(LLTCException):
    """A class distribution could not be constructed."""


class NegativeEntry(InvalidDistribution):
    """A probability vector contained a negative entry."""


class AllZero(InvalidDistribution):
    """A probability vector had no positive entry."""


class NonFinite(InvalidDistribution):
    """A probability vector contained NaN or infinity."""


class InvalidSample(LLTCException):
    """A sample or sample collection violated its invariants."""


class ClassCountMismatch(LLTCException):
    """Two distributions or sets disagree on the number of classes."""


class DimensionMismatch(LLTCException):
    """A feature vector does not match the dimension a model expects."""


class EmptyClass(LLTCException):
    """Some class has no training sample."""


class Degenerate(LLTCException):
    """Training produced a non-finite loss."""


class EmptyCandidateSet(LLTCException):
    """There were no candidates to select from."""


class EmptyPool(LLTCException):
    """The unlabeled pool was empty."""


class InvalidStrategy(LLTCException):
    """The strategy kind or its parameters were not valid."""


class PoolExhausted(LLTCException):
    """Nothing is left to collect or select. Signals natural termination."""


class EmptyTestSet(LLTCException):
    """Accuracy was requested on an empty test set."""


class TrafficMismatch(LLTCException):
    """Bytes received by the cloud differ from the bytes the ledger sent."""


class ConservationViolated(LLTCException):
    """The item-count conservation identity did not hold."""


class DuplicateSample(LLTCException):
    """A sample id was admitted to the training set twice."""


class IoFailure(LLTCException):
    """A file could not be read or written."""


class SchemaViolation(LLTCException):
    """A file did not follow its documented schema."""


class FieldErrors(LLTCException):
    """Base for validation errors that carry dotted field paths."""

    def __init__(self, errors: typing.Sequence[tuple[str, str]]):
        self.errors = list(errors)
        super().__init__(
            "; ".join(f"{field}: {message}" for field, message in self.errors)
        )


class SpecInvalid(FieldErrors):
    """The synthetic dataset spec was not valid."""


class ConfigInvalid(FieldErrors):
    """The experiment configuration was not valid."""


class RunFailed(LLTCException):
    """An experiment run failed at runtime."""

    def __init__(self, strategy: str, seed: int, reason: str):
        self.strategy = strategy
        self.seed = seed
        self.reason = reason
        super().__init__(f"Run '{strategy}' with seed {seed} failed: {reason}")

    def __reduce__(self) -> tuple[typing.Any, ...]:
        return (type(self), (self.strategy, self.seed, self.reason))
