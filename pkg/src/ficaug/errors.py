"""Exception hierarchy shared by every stage of the pipeline."""


class FicaugError(Exception):
    """Base class for all errors raised by this package."""

    exit_code = 3


class ConfigurationError(FicaugError, ValueError):
    exit_code = 2


class SchemaError(ConfigurationError):
    """A requested column is absent or the dataset lacks a required key."""


class IngestionError(FicaugError, ValueError):
    """A cell could not be parsed as a finite number."""

    exit_code = 2

    def __init__(self, message, row=None, column=None):
        super().__init__(message)
        self.row = row
        self.column = column


class DatasetError(FicaugError, ValueError):
    exit_code = 2


class UnsupportedError(FicaugError, ValueError):
    exit_code = 2


class FoldError(FicaugError, ValueError):
    exit_code = 2


class InfeasibleError(FicaugError, ValueError):
    """k-means asked for more clusters than there are points."""


class ShapeError(FicaugError, ValueError):
    pass


class ContractError(FicaugError):
    """An operation was called outside its precondition."""


class DegenerateGeometryError(FicaugError, ValueError):
    pass


class ExportError(FicaugError, OSError):
    pass


class ReportError(FicaugError, ValueError):
    pass


class TrainingError(FicaugError, RuntimeError):
    def __init__(self, message, epoch=None):
        super().__init__(message)
        self.epoch = epoch


class NotFittedError(FicaugError, RuntimeError):
    pass
