class DataError(Exception):
    """Base class for problems with input data or its configuration."""


class ParseError(DataError):
    """A data file could not be parsed."""


class SchemaError(DataError):
    """Parsed data does not describe a binary classification problem."""


class ConfigurationError(DataError):
    """The data cannot support the requested partitioning."""
