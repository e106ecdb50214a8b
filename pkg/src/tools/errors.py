"""error types shared by the pooling, regression and protocol modules"""

from typing import Optional


class InvalidInputError(ValueError):
    """Input data is empty, non-finite or too short for the operation"""


class InvalidParameterError(ValueError):
    """A pooling, SVR or protocol parameter is out of range"""


class PoolingDomainError(ValueError):
    """Scores fall outside the domain of a pooling function"""

    def __init__(self, msg: str, video_id: Optional[str] = None):
        self.video_id = video_id
        if video_id is not None:
            msg = f"video {video_id}: {msg}"
        super().__init__(msg)


class UndefinedCorrelationError(ValueError):
    """Correlation requested for a constant sequence"""


class DegenerateInputError(ValueError):
    """Curve fitting on data without spread"""


class DimensionError(ValueError):
    """Feature vectors of mismatching arity"""


class DatasetError(ValueError):
    """Records across input files do not assemble into a valid dataset"""


class CsvParseError(ValueError):
    def __init__(self, path: str, line: int, msg: str):
        self.path = path
        self.line = line
        super().__init__(f"{path}:{line}: {msg}")


class ModelFormatError(ValueError):
    """Serialized model text is malformed or of an unsupported version"""


DATA_ERRORS = (
    InvalidInputError,
    InvalidParameterError,
    PoolingDomainError,
    UndefinedCorrelationError,
    DegenerateInputError,
    DimensionError,
    DatasetError,
)


class UsageError(ValueError):
    """Command-line arguments that parse but make no sense together"""
