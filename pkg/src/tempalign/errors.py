"""Exception types shared across the package."""


class ContractViolationError(ValueError):
    """An input broke a documented structural precondition (shape, emptiness, finiteness)."""


class ParameterError(ValueError):
    """A numeric parameter is outside its documented range."""


class DegenerateEmbeddingError(ValueError):
    """An embedding row has (near-)zero norm and cannot be L2-normalized."""


class TrainingDivergedError(RuntimeError):
    """The training loss or the parameters became non-finite."""


class DatasetFormatError(ValueError):
    """A dataset file on disk is malformed; carries file and line context."""


class UndefinedMetricError(ValueError):
    """A metric is mathematically undefined for the given inputs."""
