"""Exception types shared across the package."""


class FeatstreamError(Exception):
    """Base class for all featstream errors."""


class FormatError(FeatstreamError):
    """Stream does not carry the expected format (magic, version, enum tags)."""


class CorruptionError(FeatstreamError):
    """Stream is internally inconsistent (truncation, CRC, length/count mismatch)."""


class ValidationError(FeatstreamError):
    """Tensor data violates an invariant (non-finite values, dims/category mismatch)."""


class ProtocolError(FeatstreamError):
    """Wire frame violates the transport protocol."""


class TransportError(FeatstreamError):
    """Client-side transport failure: connection trouble or a non-OK response.

    ``status`` carries the remote status code when the server answered
    with an error, and is None for local connection failures.
    """

    def __init__(self, message, status=None):
        super().__init__(message)
        self.status = status
