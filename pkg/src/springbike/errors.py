"""Exception hierarchy shared across the package."""


class SpringBikeError(Exception):
    """Base class for all package errors."""


class InvalidGeometryError(SpringBikeError, ValueError):
    pass


class InvalidTurnError(SpringBikeError, ValueError):
    pass


class SingularIndexError(SpringBikeError, ValueError):
    pass


class SensorFault(SpringBikeError):
    """A sensor reported a value outside its physical range."""


class ModeError(SpringBikeError):
    """Motion was requested while the drive is disengaged."""


class OutOfDomainError(SpringBikeError, ValueError):
    """A geodetic point lies outside the flat-earth validity radius."""


class ConfigError(SpringBikeError):
    def __init__(self, message, *, field=None, line=None):
        self.field = field
        self.line = line
        where = []
        if line is not None:
            where.append(f"line {line}")
        if field is not None:
            where.append(field)
        prefix = f"[{', '.join(where)}] " if where else ""
        super().__init__(prefix + message)


class ParseError(SpringBikeError, ValueError):
    """Base class for command parse failures.

    ``position`` is the 0-based character offset of the offending token, or
    ``None`` when the error concerns the whole message.
    """

    def __init__(self, message, position=None):
        self.position = position
        suffix = f" (at column {position})" if position is not None else ""
        super().__init__(message + suffix)


class UnknownVerbError(ParseError):
    pass


class ArityError(ParseError):
    pass


class NonNumericError(ParseError):
    pass


class CoordinateRangeError(ParseError):
    pass


class MessageTooLongError(ParseError):
    pass
