"""Exception hierarchy; the CLI maps each class to an exit code."""


class CurateError(Exception):
    """Invalid input or failed validation (CLI exit code 2)."""


class DatasetError(CurateError):
    pass


class MatrixFormatError(CurateError):
    pass


class EmbeddingError(CurateError):
    pass


class ServiceError(Exception):
    """A remote embedding service could not be reached or misbehaved (exit 3)."""
