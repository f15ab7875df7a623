"""Exception types shared across the pipeline; the CLI maps each to an exit code."""


class ConfigError(ValueError):
    """Invalid or inconsistent configuration."""


class DataError(ValueError):
    """A dataset file or matrix violates its schema."""


class PreconditionError(ValueError):
    """An operation's input preconditions do not hold (class balance, sizes, missing artifacts)."""
