"""Error taxonomy: domain errors (bad inputs), resource errors (achievable-but-capped)."""


class PfsError(Exception):
    pass


class DomainError(PfsError):
    """Input outside the operation's mathematical domain."""


class ResourceError(PfsError):
    """The request is well posed but exceeds a configured cap.

    `achievable` carries the best tolerance / horizon that the cap allows,
    when the operation can name one.
    """

    def __init__(self, message, achievable=None):
        super().__init__(message)
        self.achievable = achievable
