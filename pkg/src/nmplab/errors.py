class NmpLabError(Exception):
    """Base class for errors raised by nmplab."""


class DomainError(NmpLabError, ValueError):
    """An argument lies outside the mathematical domain of an operation."""


class ConfigurationError(NmpLabError, ValueError):
    """Invalid or mutually inconsistent configuration."""


class ProtocolError(NmpLabError):
    """Packets that cannot belong to one stream (e.g. mixed config tags)."""


class DecodeError(NmpLabError, ValueError):
    """A byte sequence is not a valid datagram."""


class UnreliableMeasurementError(NmpLabError):
    """A measurement was attempted but its confidence is too low to report."""
