"""Shared exception types."""


class ConfigError(ValueError):
    """Invalid experiment configuration or config-file syntax."""


class DataFormatError(ValueError):
    """A dataset/model/phase file is missing fields or corrupt."""


class SolverError(RuntimeError):
    """Every start of the least-squares solver failed."""


class TrainingError(RuntimeError):
    """Network training could not be completed."""
