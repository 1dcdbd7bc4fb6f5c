"""Exception types shared across the package."""


class TwoViewError(Exception):
    """Base class for all errors raised by this package."""


class ParseError(TwoViewError):
    """A dataset file line could not be parsed."""

    def __init__(self, path, line_no, message):
        super().__init__(f"{path}:{line_no}: {message}")
        self.path = str(path)
        self.line_no = line_no


class UnknownSymbolError(TwoViewError):
    """A name does not resolve in the relevant vocabulary."""


class ConfigError(TwoViewError):
    """An invalid configuration or variant combination."""


class EvalError(TwoViewError):
    """An evaluation request that cannot be answered."""


class CheckpointError(TwoViewError):
    """A checkpoint file is malformed or does not match the dataset."""
