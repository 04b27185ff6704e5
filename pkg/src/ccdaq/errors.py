"""Exception hierarchy shared across the suite.

Every error carries a short machine-readable ``code`` that the server echoes
back to clients in ``ERR <code> ...`` replies.
"""


class CcdaqError(Exception):
    code = "error"

    def __str__(self):
        msg = super().__str__()
        return msg if msg else self.code


class ParameterError(CcdaqError):
    """A request parameter is out of range or inconsistent.  Names the field."""

    code = "parameter"

    def __init__(self, field, message):
        super().__init__(f"{field}: {message}")
        self.field = field


class WrongOperationError(CcdaqError):
    """Exposure type routed to an operation that does not handle it."""

    code = "wrong-operation"


class ConfigError(CcdaqError):
    code = "config"


class InsufficientDataError(CcdaqError):
    code = "insufficient-data"


class DegenerateFitError(CcdaqError):
    code = "degenerate-fit"


class BadRampError(CcdaqError):
    code = "bad-ramp"


class TransportError(CcdaqError):
    code = "transport"


class UnreachableError(TransportError):
    code = "unreachable"


class AlreadyConnectedError(TransportError):
    code = "already-connected"


class NotConnectedError(TransportError):
    code = "not-connected"


class PeerLostError(TransportError):
    code = "peer-lost"


class ControllerError(CcdaqError):
    code = "controller"


class ConnectionLostError(CcdaqError):
    code = "connection-lost"
