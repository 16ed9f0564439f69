"""Exception types raised across the package."""


class InvalidArgumentError(ValueError):
    pass


class ConfigurationError(ValueError):
    pass


class FormatError(ValueError):
    """Input file does not match the expected layout."""

    def __init__(self, message, line=None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line


class UndefinedMetricError(ValueError):
    pass


class WrongMethodError(TypeError):
    pass


class NumericError(ArithmeticError):
    pass


class TrainingDivergedError(RuntimeError):
    def __init__(self, epoch, context=""):
        msg = f"training diverged (non-finite loss) at epoch {epoch}"
        if context:
            msg += f" [{context}]"
        super().__init__(msg)
        self.epoch = epoch
        self.context = context
