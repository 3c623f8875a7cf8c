"""Exception types shared across the toolkit."""


class BagkitError(Exception):
    """Base class for all toolkit errors."""


class DataError(BagkitError):
    """Bad input data: unreadable files, malformed records, invalid labels."""


class ConfigError(BagkitError):
    """Invalid experiment configuration (parse errors or structural violations)."""


class TrainingDiverged(BagkitError):
    """Training loss became non-finite; carries the offending epoch/batch."""
