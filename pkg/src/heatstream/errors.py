"""Exception types shared across the package."""


class HeatstreamError(Exception):
    """Base class for all errors raised by this package."""


class ParseError(HeatstreamError):
    """Malformed RTTM/SegLST/binary input.

    ``location`` identifies the offending line number (RTTM) or record
    index (SegLST) when known.
    """

    def __init__(self, message: str, location: int | None = None):
        if location is not None:
            message = f"{message} (at {location})"
        super().__init__(message)
        self.location = location


class InfeasibleError(HeatstreamError):
    """A simulation spec or scoring request that cannot be satisfied."""


class UnsupportedError(HeatstreamError):
    """Input shape outside the supported contract (e.g. >2 hypothesis streams)."""
