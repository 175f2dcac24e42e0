"""Exception taxonomy shared across the engine.

ConfigError covers bad parameters/configuration (CLI exit code 2, HTTP 400),
DataError covers problems reported by the engine about the data itself
(CLI exit code 3, HTTP 422).
"""


class GeoClusterError(Exception):
    """Base class for all engine errors."""


class ConfigError(GeoClusterError):
    """Invalid configuration or parameters."""


class SchemaError(ConfigError):
    """A schema map references a column the input does not carry."""


class DataError(GeoClusterError):
    """The data cannot support the requested operation."""


class IngestError(DataError):
    """An input file could not be parsed."""


class ValidationError(DataError):
    """A parsed row violates a record invariant."""


class UnmappedLocation(DataError):
    """A place name resolves to nothing, even after the mapping table."""

    def __init__(self, name: str, message: str | None = None):
        self.name = name
        super().__init__(message or f"unmapped location: {name!r}")
