class TierlabError(Exception):
    """Base class for simulator errors."""


class ConfigError(TierlabError):
    """Inconsistent or malformed configuration.  ``key`` names the offending entry."""

    def __init__(self, message, key=None):
        super().__init__(message)
        self.key = key


class CapacityError(TierlabError):
    pass


class OutOfMemory(CapacityError):
    pass


class UnreachableNode(TierlabError):
    pass


class NotMigratable(TierlabError):
    pass


class DestinationFull(CapacityError):
    pass


class EmptyDeviceSet(TierlabError):
    pass


class MigrationInFlight(TierlabError):
    pass
