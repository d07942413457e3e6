"""Exception types shared across the toolkit."""


class CorpusKgError(Exception):
    """Base class for all toolkit errors."""


# corpus ingestion
class DuplicatePosition(CorpusKgError):
    pass


class PositionOutOfRange(CorpusKgError):
    pass


class MissingPosition(CorpusKgError):
    pass


# candidate extraction
class InvariantViolation(CorpusKgError):
    pass


class ParseError(CorpusKgError):
    def __init__(self, message, line_number=None):
        super().__init__(message)
        self.line_number = line_number


# clustering / schema
class InvalidK(CorpusKgError):
    pass


class EmptyCluster(CorpusKgError):
    pass


class EncoderUnavailable(CorpusKgError):
    pass


# annotation dataset
class OffsetError(CorpusKgError):
    pass


class DanglingRef(CorpusKgError):
    pass


class SplitError(CorpusKgError):
    pass


class EpisodeInfeasible(CorpusKgError):
    pass


class InvalidFold(CorpusKgError):
    pass


# sequence tagging
class DimensionMismatch(CorpusKgError):
    pass


class InvalidGold(CorpusKgError):
    pass


class TrainingDiverged(CorpusKgError):
    pass


# relation classification
class IncompleteSupport(CorpusKgError):
    pass


# pipeline / validation
class MissingAdjudication(CorpusKgError):
    pass


# graph store / service
class StoreClosed(CorpusKgError):
    pass


class NotFound(CorpusKgError):
    pass


class BindError(CorpusKgError):
    pass
