"""Exception types shared across pipeline stages."""


class PipelineError(Exception):
    """Base class for errors raised by pipeline stages."""


class MissingInputError(PipelineError):
    """A required input file does not exist."""


class SchemaError(PipelineError):
    """An input file's header does not match its documented schema."""


class ConfigError(PipelineError):
    """A run configuration is invalid or incomplete."""


class DeflatorError(PipelineError):
    """A year present in the data is missing from the deflator table."""


class ConvergenceError(PipelineError):
    """The fixed-effects demeaning solver failed to converge."""


class EstimationError(PipelineError):
    """A regression design is degenerate (rank-deficient, empty bin, ...)."""


class GenerationError(PipelineError):
    """A synthetic-data configuration is infeasible."""


class StageError(PipelineError):
    """Wraps any stage failure with the stage name for CLI reporting."""

    def __init__(self, stage: str, cause: BaseException):
        self.stage = stage
        self.cause = cause
        super().__init__(f"stage '{stage}' failed: {cause}")
